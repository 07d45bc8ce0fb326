"""Experiment configuration: a TOML document whose schema is the shipped default.

User files are merged over ``data/default.toml``; a key that is not present
in the default (or in the optional ``[calibration]`` override section) is
rejected with its dotted path.
"""
from __future__ import annotations

import copy
import sys
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import bb84
from .bb84 import Basis, DistillationModel
from .detection import PinTiaSpec, SpadSpec
from .emitter import EmitterSpec, EmitterVLI, TxBudget
from .errors import ConfigError
from .experiments import Anchors, CalibrationSet, Protocol, SystemModel, rop_grid
from .link import FiberSpec, WdmSpec
from .photonics import FlatTopFilter, Wavelength

CALIBRATION_KEYS = ("tx_loss_db", "rx_link_loss_db", "e_opt", "wdm_isolation_db",
                    "raman_beta", "rx_noise_current_a")


def default_text() -> str:
    return resources.files("coexqkd").joinpath("data/default.toml").read_text(encoding="utf-8")


def _defaults() -> dict:
    return tomllib.loads(default_text())


def _check_type(path, value, default):
    if isinstance(default, bool) or isinstance(value, bool):
        ok = type(value) is type(default)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float))
    elif isinstance(default, int):
        ok = isinstance(value, int)
    elif isinstance(default, str):
        ok = isinstance(value, str)
    elif isinstance(default, list):
        ok = isinstance(value, list) and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    else:
        ok = False
    if not ok:
        raise ConfigError(f"{path}: expected {type(default).__name__}, got {value!r}")
    if isinstance(default, float):
        return float(value)
    if isinstance(default, list):
        return [float(v) for v in value]
    return value


def merge(user: dict, source: str = "<config>") -> dict:
    """Validate ``user`` against the default schema and overlay it."""
    merged = _defaults()
    merged["calibration"] = {}
    for section, body in user.items():
        if section == "calibration":
            if not isinstance(body, dict):
                raise ConfigError(f"{source}: [calibration] must be a table")
            for key, value in body.items():
                if key not in CALIBRATION_KEYS:
                    raise ConfigError(f"{source}: unknown key 'calibration.{key}'")
                merged["calibration"][key] = _check_type(f"calibration.{key}", value, 0.0)
            continue
        if section not in merged:
            raise ConfigError(f"{source}: unknown section '{section}'")
        if not isinstance(body, dict):
            raise ConfigError(f"{source}: '{section}' must be a table")
        for key, value in body.items():
            if key not in merged[section]:
                raise ConfigError(f"{source}: unknown key '{section}.{key}'")
            merged[section][key] = _check_type(f"{section}.{key}", value, merged[section][key])
    return merged


@dataclass
class ExperimentConfig:
    values: dict
    source: str = "<default>"

    @classmethod
    def default(cls) -> ExperimentConfig:
        return cls(merge({}))

    @classmethod
    def from_text(cls, text: str, source: str = "<string>") -> ExperimentConfig:
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{source}: {exc}") from None
        return cls(merge(data, source), source)

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_text(text, str(path))

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    def override(self, section: str, **kwargs) -> ExperimentConfig:
        values = copy.deepcopy(self.values)
        overlay = {s: dict(v) for s, v in values.items() if s != "calibration"}
        overlay.setdefault(section, {}).update(kwargs)
        overlay["calibration"] = values["calibration"]
        return ExperimentConfig(merge(overlay, self.source), self.source)

    # ------------------------------------------------------------------ builders

    def distillation(self) -> DistillationModel:
        p = self["protocol"]
        name = p["distillation"]
        try:
            if name == "ideal_asymptotic":
                return DistillationModel.ideal_asymptotic()
            if name == "ec_efficiency":
                return DistillationModel.ec_efficiency(p["ec_efficiency"])
            if name == "fixed_fraction":
                return DistillationModel.fixed_fraction(p["fixed_fraction"])
        except ValueError as exc:
            raise ConfigError(f"protocol: {exc}") from None
        raise ConfigError(f"protocol.distillation: unknown model {name!r}")

    def system(self) -> SystemModel:
        e, t, f, w = self["emitter"], self["tx"], self["fiber"], self["wdm"]
        s, c, p, a = self["spad"], self["classical_rx"], self["protocol"], self["anchors"]
        try:
            lam_q = Wavelength.from_nm(t["quantum_wavelength_nm"])
            return SystemModel(
                emitter=EmitterSpec(
                    EmitterVLI(tuple(e["vli_current_ma"]), tuple(e["vli_power_w"])),
                    Wavelength.from_nm(e["center_nm"]), e["fwhm_nm"]),
                drive_current_ma=e["drive_current_ma"],
                tx=TxBudget(
                    FlatTopFilter.from_ghz(lam_q, t["slicing_filter_width_ghz"],
                                           insertion_loss_db=t["slicing_filter_insertion_loss_db"],
                                           out_of_band_isolation_db=t["slicing_filter_isolation_db"]),
                    0.0, t["symbol_rate_baud"]),
                fiber=FiberSpec(f["length_km"], f["attenuation_quantum_db_per_km"],
                                f["attenuation_classical_db_per_km"]),
                wdm=WdmSpec(w["mux_insertion_loss_quantum_db"], w["mux_insertion_loss_classical_db"],
                            cleanup_filter_insertion_loss_db=w["cleanup_filter_insertion_loss_db"]),
                cleanup=FlatTopFilter.from_ghz(
                    lam_q, w["cleanup_filter_width_ghz"],
                    insertion_loss_db=w["cleanup_filter_insertion_loss_db"],
                    out_of_band_isolation_db=w["cleanup_filter_isolation_db"]),
                classical_wavelength=Wavelength.from_nm(w["classical_wavelength_nm"]),
                spad=SpadSpec(s["efficiency"], s["dead_time_s"], s["dark_rate_cps"]),
                rx=PinTiaSpec(c["responsivity_a_per_w"]),
                protocol=Protocol(
                    window_fraction=p["window_fraction"], sift_factor=p["sift_factor"],
                    signal_window_acceptance=p["signal_window_acceptance"],
                    depolarization_qber_floor=p["depolarization_qber_floor"],
                    qber_threshold=p["qber_threshold"], distillation=self.distillation(),
                    aes_key_bits=p["aes_key_bits"], aes_chunk_bytes=p["aes_chunk_bytes"]),
                anchors=Anchors(
                    mu=a["mu"], raw_rate_cps=a["raw_rate_cps"], qber=a["qber"],
                    sensitivity_dbm=c["sensitivity_dbm"], target_ber=c["target_ber"],
                    b2b_crossing_rop_dbm=a["b2b_crossing_rop_dbm"],
                    fiber_crossing_rop_dbm=a["fiber_crossing_rop_dbm"],
                    crossing_qber=a["crossing_qber"]),
            )
        except ValueError as exc:
            raise ConfigError(f"{self.source}: {exc}") from None

    def apply_overrides(self, cal: CalibrationSet) -> CalibrationSet:
        """Replace fitted constants by any values given under [calibration]."""
        return replace(cal, **self["calibration"]) if self["calibration"] else cal

    def sweep_grid(self):
        sw = self["sweep"]
        if sw["rop_step_db"] <= 0 or sw["rop_max_dbm"] <= sw["rop_min_dbm"]:
            raise ConfigError("sweep: need rop_step_db > 0 and rop_max_dbm > rop_min_dbm")
        return rop_grid(sw["rop_min_dbm"], sw["rop_max_dbm"], sw["rop_step_db"])

    def receiver(self) -> bb84.PolState:
        m = self["montecarlo"]
        try:
            return bb84.PolState.of(Basis.parse(m["receiver_basis"]), m["receiver_bit"])
        except ValueError as exc:
            raise ConfigError(f"montecarlo: {exc}") from None

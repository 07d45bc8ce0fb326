"""Anchor calibration and the experiments built on it.

The quantum link is held at a fixed optical budget in both the back-to-back
and the 1-km configurations; only the classical-channel noise differs.
Classical powers are given as the received optical power (ROP) at the
classical receiver.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.optimize import bisect

from . import bb84, detection, link
from . import emitter as emitter_mod
from .bb84 import DistillationModel, QberReport
from .detection import PinTiaSpec, SpadSpec, WindowRates
from .errors import InfeasibleCalibration, UncoveredRangeError
from .photonics import FlatTopFilter, PowerLevel, Wavelength, db_to_linear

BACK_TO_BACK = "back_to_back"
FIBER = "fiber_1km"
CONFIGS = (BACK_TO_BACK, FIBER)


@dataclass(frozen=True)
class Anchors:
    """Reported operating points the model is calibrated against."""

    mu: float = 0.0148
    raw_rate_cps: float = 1330.0
    qber: float = 0.088
    sensitivity_dbm: float = -29.9
    target_ber: float = 1e-10
    b2b_crossing_rop_dbm: float = -23.5
    fiber_crossing_rop_dbm: float = -28.4
    crossing_qber: float = 0.11


@dataclass(frozen=True)
class Protocol:
    window_fraction: float = 0.5
    sift_factor: float = 0.5
    signal_window_acceptance: float = 1.0
    depolarization_qber_floor: float = 0.0
    qber_threshold: float = bb84.QBER_THRESHOLD
    distillation: DistillationModel = DistillationModel.ideal_asymptotic()
    aes_key_bits: int = 256
    aes_chunk_bytes: float = 64e9


@dataclass(frozen=True)
class SystemModel:
    """Every fixed physical parameter of the setup."""

    emitter: emitter_mod.EmitterSpec = field(default_factory=emitter_mod.EmitterSpec)
    drive_current_ma: float = emitter_mod.DEFAULT_OPERATING_CURRENT_MA
    tx: emitter_mod.TxBudget = field(default_factory=emitter_mod.TxBudget)
    fiber: link.FiberSpec = field(default_factory=link.FiberSpec)
    wdm: link.WdmSpec = field(default_factory=link.WdmSpec)
    cleanup: FlatTopFilter = field(default_factory=emitter_mod.default_slicing_filter)
    classical_wavelength: Wavelength = link.CLASSICAL_WAVELENGTH
    spad: SpadSpec = field(default_factory=SpadSpec)
    rx: PinTiaSpec = field(default_factory=PinTiaSpec)
    protocol: Protocol = field(default_factory=Protocol)
    anchors: Anchors = field(default_factory=Anchors)

    @property
    def symbol_rate_baud(self) -> float:
        return self.tx.symbol_rate_baud

    def fiber_for(self, config: str) -> link.FiberSpec:
        if config == BACK_TO_BACK:
            return replace(self.fiber, length_km=0.0)
        if config == FIBER:
            return self.fiber
        raise ValueError(f"unknown configuration {config!r}; use one of {CONFIGS}")


@dataclass(frozen=True)
class CalibrationSet:
    tx_loss_db: float
    rx_link_loss_db: float
    e_opt: float
    wdm_isolation_db: float
    raman_beta: float
    rx_noise_current_a: float
    # QBER(model) - QBER(anchor) left over after flooring e_opt at zero
    qber_fit_residual: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class OperatingPoint:
    rop_dbm: float | None
    config: str
    mu: float
    rates: WindowRates
    qber: float
    raw_rate_cps: float
    classical_ber: float
    leakage_photon_rate: float
    raman_photon_rate: float


# --------------------------------------------------------------------------- model

def _wdm(system: SystemModel, cal: CalibrationSet) -> link.WdmSpec:
    return replace(system.wdm, classical_to_quantum_isolation_db=cal.wdm_isolation_db)


def _tx(system: SystemModel, cal: CalibrationSet) -> emitter_mod.TxBudget:
    return replace(system.tx, modulator_insertion_loss_db=cal.tx_loss_db)


def transmitted_mu(system: SystemModel, cal: CalibrationSet) -> float:
    return emitter_mod.mu_at_modulator_output(system.emitter, _tx(system, cal), system.drive_current_ma)


def noise_photon_rates(system: SystemModel, cal: CalibrationSet, rop_dbm: float | None,
                       config: str) -> tuple[float, float]:
    """(leakage, Raman) photons/s at the quantum detector input."""
    if rop_dbm is None:
        return 0.0, 0.0
    rop = PowerLevel.from_dbm(rop_dbm)
    fiber = system.fiber_for(config)
    wdm = _wdm(system, cal)
    leak = link.leakage_noise_rate(wdm, rop, system.cleanup, system.classical_wavelength)
    launch = link.classical_launch_power(rop, fiber, wdm)
    raman = link.raman_noise_rate(link.RamanModel(cal.raman_beta), launch, fiber,
                                  system.cleanup.passband_nm)
    return leak, raman


def _window_rates(system: SystemModel, mu_arrival: float, noise_in: float) -> WindowRates:
    p = system.protocol
    return detection.expected_window_rates(
        mu_arrival, system.spad, system.symbol_rate_baud, p.window_fraction, noise_in,
        p.sift_factor, p.signal_window_acceptance)


def _qber(system: SystemModel, rates: WindowRates, e_opt: float, config: str) -> float:
    q = bb84.qber_analytic(rates.signal, rates.dark, rates.noise, e_opt)
    if config == FIBER:
        q += system.protocol.depolarization_qber_floor
    return min(q, 0.5)


def operating_point(system: SystemModel, cal: CalibrationSet, rop_dbm: float | None = None,
                    config: str = BACK_TO_BACK, mu_scale: float = 1.0) -> OperatingPoint:
    """Analytic rates, QBER and classical BER at one classical ROP.

    ``rop_dbm=None`` switches the classical channel off.
    """
    mu = transmitted_mu(system, cal) * mu_scale
    leak, raman = noise_photon_rates(system, cal, rop_dbm, config)
    rates = _window_rates(system, mu * db_to_linear(cal.rx_link_loss_db), leak + raman)
    if rop_dbm is None:
        ber = 0.5
    else:
        ber = float(detection.classical_ber_dbm(
            replace(system.rx, noise_current_rms_a=cal.rx_noise_current_a), rop_dbm))
    return OperatingPoint(rop_dbm, config, mu, rates, _qber(system, rates, cal.e_opt, config),
                          rates.total, ber, leak, raman)


# --------------------------------------------------------------------------- calibration

def _fit_rx_link_loss(system: SystemModel, mu: float) -> float:
    target = system.anchors.raw_rate_cps

    def excess(loss_db):
        return _window_rates(system, mu * db_to_linear(loss_db), 0.0).total - target

    if excess(0.0) < 0:
        raise InfeasibleCalibration(
            f"raw-rate anchor {target:g} cts/s exceeds the lossless-link rate "
            f"{excess(0.0) + target:.4g} cts/s", step="rx_link_loss", anchor="raw_rate")
    floor = _window_rates(system, 0.0, 0.0).total
    if floor >= target:
        raise InfeasibleCalibration(
            f"dark counts alone ({floor:.4g} cts/s) reach the raw-rate anchor",
            step="rx_link_loss", anchor="raw_rate")
    hi = 10.0
    while excess(hi) > 0:
        hi *= 2
    return bisect(excess, 0.0, hi, xtol=1e-13, maxiter=500)


def _fit_e_opt(system: SystemModel, rates: WindowRates) -> tuple[float, float]:
    q = system.anchors.qber
    e = (q * rates.total - 0.5 * (rates.dark + rates.noise)) / rates.signal
    if e > 0.5:
        raise InfeasibleCalibration(f"QBER anchor {q} needs e_opt = {e:.3f} > 0.5",
                                    step="e_opt", anchor="qber")
    e_opt = max(e, 0.0)
    residual = bb84.qber_analytic(rates.signal, rates.dark, rates.noise, e_opt) - q
    return e_opt, residual


def calibrate_all(system: SystemModel) -> CalibrationSet:
    """Sequentially fit the six free constants to the anchors.

    1. transmitter loss from the mean photon number
    2. quantum link loss and intrinsic error from (raw rate, QBER)
    3. classical receiver noise from the sensitivity
    4. WDM isolation from the back-to-back QBER crossing
    5. Raman coefficient from the 1-km QBER crossing
    """
    a = system.anchors
    tx_loss = emitter_mod.calibrate_tx_loss(system.emitter, system.tx, a.mu, system.drive_current_ma)
    mu = emitter_mod.mu_at_modulator_output(
        system.emitter, replace(system.tx, modulator_insertion_loss_db=tx_loss),
        system.drive_current_ma)

    rx_loss = _fit_rx_link_loss(system, mu)
    mu_arrival = mu * db_to_linear(rx_loss)
    e_opt, residual = _fit_e_opt(system, _window_rates(system, mu_arrival, 0.0))

    noise_current = detection.calibrate_rx_noise(
        system.rx, PowerLevel.from_dbm(a.sensitivity_dbm), a.target_ber)

    def qber_b2b(noise_in):
        return _qber(system, _window_rates(system, mu_arrival, noise_in), e_opt, BACK_TO_BACK)

    def qber_fiber(noise_in):
        return _qber(system, _window_rates(system, mu_arrival, noise_in), e_opt, FIBER)

    iso = link.calibrate_isolation(qber_b2b, system.wdm, PowerLevel.from_dbm(a.b2b_crossing_rop_dbm),
                                   system.cleanup, a.crossing_qber, system.classical_wavelength)

    rop_fiber = PowerLevel.from_dbm(a.fiber_crossing_rop_dbm)
    wdm = replace(system.wdm, classical_to_quantum_isolation_db=iso)
    leak = link.leakage_noise_rate(wdm, rop_fiber, system.cleanup, system.classical_wavelength)
    launch = link.classical_launch_power(rop_fiber, system.fiber, wdm)
    raman = link.calibrate_raman(qber_fiber, leak, launch, system.fiber,
                                 system.cleanup.passband_nm, a.crossing_qber)

    return CalibrationSet(float(tx_loss), float(rx_loss), float(e_opt), float(iso), float(raman.beta),
                          float(noise_current), float(residual))


@dataclass(frozen=True)
class AnchorCheck:
    name: str
    target: float
    achieved: float
    tolerance: float
    relative: bool = False

    @property
    def residual(self) -> float:
        return self.achieved - self.target

    @property
    def ok(self) -> bool:
        err = abs(self.residual) / abs(self.target) if self.relative else abs(self.residual)
        return err <= self.tolerance


def closure_checks(system: SystemModel, cal: CalibrationSet) -> list[AnchorCheck]:
    """Re-evaluate every anchor under ``cal``."""
    a = system.anchors
    b2b = operating_point(system, cal)
    sens = operating_point(system, cal, a.sensitivity_dbm, FIBER)
    cross_b2b = operating_point(system, cal, a.b2b_crossing_rop_dbm, BACK_TO_BACK)
    cross_fib = operating_point(system, cal, a.fiber_crossing_rop_dbm, FIBER)
    return [
        AnchorCheck("mu", a.mu, b2b.mu, 1e-6),
        AnchorCheck("raw_rate_cps", a.raw_rate_cps, b2b.raw_rate_cps, 0.01, relative=True),
        AnchorCheck("qber", a.qber, b2b.qber, 0.005),
        AnchorCheck("classical_ber", a.target_ber, sens.classical_ber, 0.05, relative=True),
        AnchorCheck("b2b_crossing_qber", a.crossing_qber, cross_b2b.qber, 0.002),
        AnchorCheck("fiber_crossing_qber", a.crossing_qber, cross_fib.qber, 0.002),
    ]


# --------------------------------------------------------------------------- runs

def distillation_note(raw_rate: float, qber: float, model: DistillationModel) -> str:
    ideal = bb84.secure_key_rate(raw_rate, qber, DistillationModel.ideal_asymptotic())
    fixed = bb84.secure_key_rate(raw_rate, qber, DistillationModel.fixed_fraction())
    return (f"distillation: {model.describe()}. The reported 0.37 kb/s implies a secure "
            f"fraction of {bb84.PAPER_FIXED_FRACTION} ({fixed:.1f} b/s here), which no "
            f"asymptotic formula with f >= 1 reproduces; 1 - 2 h2(Q) gives {ideal:.1f} b/s.")


def run_back_to_back(system: SystemModel, cal: CalibrationSet,
                     distillation: DistillationModel | None = None) -> QberReport:
    """Analytic back-to-back operating point with the classical channel off."""
    model = distillation or system.protocol.distillation
    op = operating_point(system, cal)
    secure = bb84.secure_key_rate(op.raw_rate_cps, op.qber, model)
    notes = [distillation_note(op.raw_rate_cps, op.qber, model)]
    if cal.qber_fit_residual:
        notes.append(f"e_opt floored at 0 leaves a QBER residual of {cal.qber_fit_residual:+.5f}")
    return QberReport(op.raw_rate_cps, op.qber, float(secure), notes=notes)


@dataclass(frozen=True, eq=False)
class SweepTable:
    rop_dbm: np.ndarray
    qber: np.ndarray
    raw_rate_cps: np.ndarray
    classical_ber: np.ndarray
    config: str

    COLUMNS = ("rop_dbm", "qber", "raw_rate_cps", "classical_ber", "config")

    def __len__(self):
        return self.rop_dbm.size

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for row in zip(self.rop_dbm, self.qber, self.raw_rate_cps, self.classical_ber):
            w.writerow([f"{v:.9g}" for v in row] + [self.config])
        return buf.getvalue()


def rop_grid(start_dbm: float = -40.0, stop_dbm: float = -15.0, step_db: float = 0.1) -> np.ndarray:
    n = int(round((stop_dbm - start_dbm) / step_db)) + 1
    return np.round(start_dbm + step_db * np.arange(n), 10)


def run_coexistence_sweep(system: SystemModel, cal: CalibrationSet, rops_dbm,
                          config: str = FIBER, mu_scale: float = 1.0) -> SweepTable:
    rops = np.asarray(rops_dbm, dtype=float)
    if np.any(np.diff(rops) <= 0):
        raise ValueError("ROP grid must be strictly ascending")
    points = [operating_point(system, cal, float(r), config, mu_scale) for r in rops]
    return SweepTable(
        rop_dbm=rops,
        qber=np.array([p.qber for p in points]),
        raw_rate_cps=np.array([p.raw_rate_cps for p in points]),
        classical_ber=np.array([p.classical_ber for p in points]),
        config=config,
    )


@dataclass(frozen=True)
class SoaxReport:
    lower_bound_rop: float
    upper_bound_rop: float
    width: float
    empty: bool
    secured_capacity_at_lower_bound: float
    secure_rate_at_lower_bound: float = 0.0
    qber_at_lower_bound: float = float("nan")
    raw_rate_at_lower_bound: float = float("nan")
    distillation: str = ""
    config: str = FIBER

    FIELDS = ("config", "lower_bound_rop_dbm", "upper_bound_rop_dbm", "width_db", "empty",
              "qber_at_lower_bound", "raw_rate_at_lower_bound_cps", "secure_rate_at_lower_bound_bps",
              "secured_capacity_at_lower_bound_bps")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.FIELDS)
        vals = (self.lower_bound_rop, self.upper_bound_rop, self.width)
        w.writerow([self.config] + [f"{v:.9g}" for v in vals] + [str(self.empty).lower()]
                   + [f"{v:.9g}" for v in (self.qber_at_lower_bound, self.raw_rate_at_lower_bound,
                                           self.secure_rate_at_lower_bound,
                                           self.secured_capacity_at_lower_bound)])
        return buf.getvalue()

    def summary(self) -> str:
        if self.empty:
            head = (f"SOAX empty: QBER limit {self.upper_bound_rop:.2f} dBm is below the "
                    f"classical sensitivity {self.lower_bound_rop:.2f} dBm")
        else:
            head = (f"SOAX [{self.lower_bound_rop:.2f}, {self.upper_bound_rop:.2f}] dBm, "
                    f"width {self.width:.2f} dB")
        return "\n".join([
            head,
            f"at the lower bound: QBER {100 * self.qber_at_lower_bound:.2f} %, raw "
            f"{self.raw_rate_at_lower_bound:.1f} cts/s, secure {self.secure_rate_at_lower_bound:.1f} b/s",
            f"AES-renewal secured capacity {self.secured_capacity_at_lower_bound / 1e9:.1f} Gb/s "
            f"({self.distillation})",
        ])


def _lower_crossing(rop, ber, target):
    ok = np.flatnonzero(ber <= target)
    if ok.size == 0 or ok[0] == 0:
        raise UncoveredRangeError(
            f"classical BER does not cross {target:g} inside [{rop[0]:g}, {rop[-1]:g}] dBm")
    i = ok[0]
    with np.errstate(divide="ignore"):
        y0, y1 = np.log10(ber[i - 1]), np.log10(ber[i])
    ly = math.log10(target)
    if not np.isfinite(y1):
        return float(rop[i])
    return float(rop[i - 1] + (ly - y0) * (rop[i] - rop[i - 1]) / (y1 - y0))


def _upper_crossing(rop, qber, threshold):
    ok = np.flatnonzero(qber <= threshold)
    if ok.size == 0:
        return -math.inf
    j = ok[-1]
    if j == rop.size - 1:
        raise UncoveredRangeError(
            f"QBER stays below {threshold} up to the top of the grid ({rop[-1]:g} dBm)")
    q0, q1 = qber[j], qber[j + 1]
    return float(rop[j] + (threshold - q0) * (rop[j + 1] - rop[j]) / (q1 - q0))


def compute_soax(sweep: SweepTable, qber_threshold: float = bb84.QBER_THRESHOLD,
                 ber_target: float = 1e-10,
                 distillation: DistillationModel = DistillationModel.fixed_fraction(),
                 key_bits: int = 256, chunk_bytes: float = 64e9) -> SoaxReport:
    """Safe operating area for co-existence from a sweep table.

    The lower bound is the classical sensitivity (log-linear interpolation of
    the BER), the upper bound the last ROP that keeps the QBER at or below
    the threshold (linear interpolation).  An inverted window is reported as
    an empty SOAX rather than raised.
    """
    rop = sweep.rop_dbm
    lower = _lower_crossing(rop, sweep.classical_ber, ber_target)
    upper = _upper_crossing(rop, sweep.qber, qber_threshold)
    empty = not upper > lower
    q_low = float(np.interp(lower, rop, sweep.qber))
    raw_low = float(np.interp(lower, rop, sweep.raw_rate_cps))
    if empty or q_low > qber_threshold:
        secure = 0.0
    else:
        secure = float(bb84.secure_key_rate(raw_low, q_low, distillation))
    return SoaxReport(
        lower_bound_rop=lower,
        upper_bound_rop=upper,
        width=0.0 if empty else upper - lower,
        empty=empty,
        secured_capacity_at_lower_bound=float(bb84.aes_secured_capacity(secure, key_bits, chunk_bytes)),
        secure_rate_at_lower_bound=secure,
        qber_at_lower_bound=q_low,
        raw_rate_at_lower_bound=raw_low,
        distillation=distillation.describe(),
        config=sweep.config,
    )


# --------------------------------------------------------------------------- Monte Carlo

def monte_carlo_physics(system: SystemModel, cal: CalibrationSet, rop_dbm: float | None = None,
                        config: str = BACK_TO_BACK):
    from .montecarlo import Physics

    mu = transmitted_mu(system, cal)
    leak, raman = noise_photon_rates(system, cal, rop_dbm, config)
    p = system.protocol
    return Physics(
        mu_arrival=mu * db_to_linear(cal.rx_link_loss_db),
        efficiency=system.spad.efficiency,
        dead_time_s=system.spad.dead_time_s,
        dark_rate_cps=system.spad.dark_rate_cps,
        raman_photon_rate=raman,
        leakage_photon_rate=leak,
        e_opt=cal.e_opt,
        window_fraction=p.window_fraction,
        signal_window_acceptance=p.signal_window_acceptance,
    )


@dataclass(frozen=True)
class CrossValidation:
    analytic: OperatingPoint
    report: object
    sync: object
    raw_rate_sigma: float
    qber_sigma: float

    @property
    def raw_rate_z(self) -> float:
        return (self.report.raw_rate - self.analytic.raw_rate_cps) / self.raw_rate_sigma

    @property
    def qber_z(self) -> float:
        return (self.report.qber - self.analytic.qber) / self.qber_sigma


def cross_validate(system: SystemModel, cal: CalibrationSet, n_symbols: int = 10_000_000,
                   seed: int = 1, rop_dbm: float | None = None, config: str = BACK_TO_BACK,
                   workers: int = 1, **run_kwargs) -> CrossValidation:
    """Simulate, run the tag pipeline and compare against the analytic model.

    The z-scores use Poisson (raw rate) and binomial (QBER) standard errors.
    """
    from .montecarlo import RunConfig, simulate_quantum_run
    from .tagproc import analyze_stream

    physics = monte_carlo_physics(system, cal, rop_dbm, config)
    period = round(1e12 / system.symbol_rate_baud)
    cfg = RunConfig(seed=seed, n_symbols=n_symbols, physics=physics, symbol_period_ps=period,
                    workers=workers, **run_kwargs)
    stream, truth = simulate_quantum_run(cfg)
    sync, report = analyze_stream(stream, cfg.frame(), cfg.receiver_state,
                                  system.protocol.window_fraction,
                                  duration_s=cfg.duration_ps * 1e-12)
    analytic = operating_point(system, cal, rop_dbm, config)
    expected_counts = analytic.raw_rate_cps * report.duration_s
    raw_sigma = math.sqrt(expected_counts) / report.duration_s
    q = analytic.qber
    q_sigma = math.sqrt(q * (1 - q) / report.sifted_bits)
    return CrossValidation(analytic, report, sync, raw_sigma, q_sigma)


__all__ = [
    "Anchors", "Protocol", "SystemModel", "CalibrationSet", "OperatingPoint", "AnchorCheck",
    "SweepTable", "SoaxReport", "CrossValidation", "BACK_TO_BACK", "FIBER", "CONFIGS",
    "operating_point", "calibrate_all", "closure_checks", "run_back_to_back",
    "run_coexistence_sweep", "compute_soax", "rop_grid", "monte_carlo_physics",
    "cross_validate", "transmitted_mu", "noise_photon_rates",
]

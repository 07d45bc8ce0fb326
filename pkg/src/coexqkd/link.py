"""Fiber/WDM propagation and the two in-band noise mechanisms.

Noise rates returned here are photon rates at the quantum detector input;
the detector model applies its efficiency.  Classical powers are referenced
to the classical receiver input (ROP) unless stated otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import bisect

from .errors import InfeasibleCalibration
from .photonics import FlatTopFilter, PowerLevel, Wavelength, db_to_linear, photon_energy

_RTOL = 4 * float(np.finfo(float).eps)

CLASSICAL_WAVELENGTH = Wavelength.from_nm(852.0)

QUANTUM = "quantum"
CLASSICAL = "classical"


@dataclass(frozen=True)
class FiberSpec:
    length_km: float = 1.0
    attenuation_quantum_db_per_km: float = 0.21
    attenuation_classical_db_per_km: float = 2.2

    def __post_init__(self):
        if self.length_km < 0:
            raise ValueError("fiber length must be >= 0")
        if self.attenuation_quantum_db_per_km < 0 or self.attenuation_classical_db_per_km < 0:
            raise ValueError("fiber attenuation must be >= 0")

    def loss_db(self, band: str) -> float:
        if band == QUANTUM:
            return self.length_km * self.attenuation_quantum_db_per_km
        if band == CLASSICAL:
            return self.length_km * self.attenuation_classical_db_per_km
        raise ValueError(f"unknown band {band!r}")


BACK_TO_BACK = FiberSpec(length_km=0.0)


@dataclass(frozen=True)
class WdmSpec:
    """Mux/demux losses and classical-to-quantum isolation.

    ``classical_to_quantum_isolation_db`` is the suppression of classical
    power on its way into the quantum detector path, not counting the
    quantum cleanup filter's own isolation.
    """

    mux_insertion_loss_quantum_db: float = 1.0
    mux_insertion_loss_classical_db: float = 1.0
    classical_to_quantum_isolation_db: float = 60.0
    cleanup_filter_insertion_loss_db: float = 0.0

    def __post_init__(self):
        for name in ("mux_insertion_loss_quantum_db", "mux_insertion_loss_classical_db",
                     "classical_to_quantum_isolation_db", "cleanup_filter_insertion_loss_db"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class RamanModel:
    """Linear short-fiber Raman coefficient.

    ``beta`` is in photons/s per (mW launch * km * nm collection bandwidth),
    referred to the quantum detector input.
    """

    beta: float = 0.0

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("Raman coefficient must be >= 0")


def link_transmittance(f: FiberSpec, w: WdmSpec, band: str) -> float:
    if band == QUANTUM:
        loss = f.loss_db(band) + w.mux_insertion_loss_quantum_db + w.cleanup_filter_insertion_loss_db
    elif band == CLASSICAL:
        loss = f.loss_db(band) + w.mux_insertion_loss_classical_db
    else:
        raise ValueError(f"unknown band {band!r}")
    return db_to_linear(loss)


def classical_launch_power(rop: PowerLevel, f: FiberSpec, w: WdmSpec) -> PowerLevel:
    """Back-compute the classical launch power from the received power."""
    return PowerLevel(rop.watts / link_transmittance(f, w, CLASSICAL))


def raman_noise_rate(r: RamanModel, p_launch_classical: PowerLevel, f: FiberSpec,
                     collection_bandwidth_nm: float) -> float:
    return r.beta * p_launch_classical.mw * f.length_km * collection_bandwidth_nm


def total_isolation_db(w: WdmSpec, cleanup: FlatTopFilter) -> float:
    return (w.classical_to_quantum_isolation_db + cleanup.insertion_loss_db
            + cleanup.out_of_band_isolation_db)


def leakage_noise_rate(w: WdmSpec, p_classical_at_demux: PowerLevel, cleanup: FlatTopFilter,
                       classical_wavelength: Wavelength = CLASSICAL_WAVELENGTH) -> float:
    """Classical photons per second leaking through to the quantum detector.

    The classical power at the demux is taken equal to the ROP; the demux's
    classical-port loss is folded into the calibrated isolation.
    """
    p = p_classical_at_demux.watts * db_to_linear(total_isolation_db(w, cleanup))
    return p / photon_energy(classical_wavelength)


def _expand_bracket(fn, lo, hi, target, increasing, limit=60):
    """Grow ``hi`` until ``fn`` crosses ``target``."""
    for _ in range(limit):
        value = fn(hi)
        if (value > target) if increasing else (value < target):
            return hi
        hi = lo + 2.0 * (hi - lo)
    return None


def calibrate_isolation(qber_at_noise: Callable[[float], float], w: WdmSpec,
                        rop: PowerLevel, cleanup: FlatTopFilter, target_qber: float = 0.11,
                        classical_wavelength: Wavelength = CLASSICAL_WAVELENGTH,
                        qber_tol: float = 1e-6) -> float:
    """Solve for the WDM isolation (dB) that puts the back-to-back QBER on target.

    ``qber_at_noise`` maps a noise photon rate at the detector input to the
    QBER of the rest of the (already calibrated) system.
    """
    baseline = qber_at_noise(0.0)
    if baseline >= target_qber:
        raise InfeasibleCalibration(
            f"baseline QBER {baseline:.4f} already at or above {target_qber}",
            step="isolation", anchor="b2b_crossing")

    # leakage photons with zero WDM isolation; the cleanup filter still applies
    n0 = leakage_noise_rate(WdmSpec(classical_to_quantum_isolation_db=0.0), rop, cleanup,
                            classical_wavelength)

    def excess(iso_db):
        return qber_at_noise(n0 * db_to_linear(iso_db)) - target_qber

    if excess(0.0) < 0:
        raise InfeasibleCalibration(
            "even zero WDM isolation does not reach the QBER threshold at the target ROP",
            step="isolation", anchor="b2b_crossing")
    hi = _expand_bracket(excess, 0.0, 100.0, 0.0, increasing=False)
    if hi is None:
        raise InfeasibleCalibration("could not bracket the isolation", step="isolation",
                                    anchor="b2b_crossing")
    iso = bisect(excess, 0.0, hi, xtol=1e-12, rtol=_RTOL, maxiter=500)
    if abs(excess(iso)) > qber_tol:
        raise InfeasibleCalibration("isolation bisection did not converge", step="isolation",
                                    anchor="b2b_crossing")
    return iso


def calibrate_raman(qber_at_noise: Callable[[float], float], leakage_rate: float,
                    p_launch_classical: PowerLevel, f: FiberSpec, collection_bandwidth_nm: float,
                    target_qber: float = 0.11, qber_tol: float = 1e-6) -> RamanModel:
    """Solve for the Raman coefficient that puts the fiber-case QBER on target.

    ``leakage_rate`` is the (fixed) leakage photon rate at the target ROP.
    """
    if qber_at_noise(leakage_rate) >= target_qber:
        raise InfeasibleCalibration(
            "leakage alone already crosses the QBER threshold at the fiber target ROP",
            step="raman", anchor="fiber_crossing")
    unit = raman_noise_rate(RamanModel(1.0), p_launch_classical, f, collection_bandwidth_nm)
    if unit <= 0:
        raise InfeasibleCalibration("Raman noise vanishes for a zero-length fiber or zero power",
                                    step="raman", anchor="fiber_crossing")

    def excess(beta):
        return qber_at_noise(leakage_rate + beta * unit) - target_qber

    hi = _expand_bracket(excess, 0.0, 1.0, 0.0, increasing=True, limit=200)
    if hi is None:
        raise InfeasibleCalibration("could not bracket the Raman coefficient", step="raman",
                                    anchor="fiber_crossing")
    beta = bisect(excess, 0.0, hi, xtol=1e-300, rtol=_RTOL, maxiter=2000)
    if abs(excess(beta)) > qber_tol:
        raise InfeasibleCalibration("Raman bisection did not converge", step="raman",
                                    anchor="fiber_crossing")
    return RamanModel(beta)

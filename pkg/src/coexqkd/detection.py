"""SPAD and PIN+TIA receiver models."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from scipy.special import erfc, erfcinv

from .photonics import PowerLevel, dbm_to_watts


@dataclass(frozen=True)
class SpadSpec:
    efficiency: float = 0.10
    dead_time_s: float = 25e-6
    dark_rate_cps: float = 485.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError("SPAD efficiency must lie in [0, 1]")
        if self.dead_time_s < 0 or self.dark_rate_cps < 0:
            raise ValueError("dead time and dark rate must be >= 0")


@dataclass(frozen=True)
class PinTiaSpec:
    responsivity_a_per_w: float = 0.56
    noise_current_rms_a: float = 1e-7

    def __post_init__(self):
        if not self.responsivity_a_per_w > 0:
            raise ValueError("responsivity must be positive")
        if not self.noise_current_rms_a > 0:
            raise ValueError("noise current must be positive")


def dead_time_observed_rate(true_rate, dead_time_s):
    """Non-paralyzable dead-time correction ``R / (1 + R*tau)``."""
    return true_rate / (1.0 + true_rate * dead_time_s)


def q_factor_for_ber(ber: float) -> float:
    """Invert ``BER = erfc(Q/sqrt 2)/2``."""
    if not 0.0 < ber < 0.5:
        raise ValueError(f"target BER must lie in (0, 0.5), got {ber}")
    return math.sqrt(2.0) * float(erfcinv(2.0 * ber))


def classical_ber(spec: PinTiaSpec, rop: PowerLevel):
    """OOK bit error ratio with Gaussian noise and infinite extinction."""
    q = spec.responsivity_a_per_w * rop.watts / spec.noise_current_rms_a
    return 0.5 * erfc(q / math.sqrt(2.0))


def classical_ber_dbm(spec: PinTiaSpec, rop_dbm):
    """Vectorized :func:`classical_ber` taking ROP in dBm."""
    q = spec.responsivity_a_per_w * dbm_to_watts(rop_dbm) / spec.noise_current_rms_a
    return 0.5 * erfc(q / math.sqrt(2.0))


def calibrate_rx_noise(spec: PinTiaSpec, sensitivity: PowerLevel, target_ber: float = 1e-10) -> float:
    """RMS noise current placing ``target_ber`` exactly at ``sensitivity``."""
    if not sensitivity.watts > 0:
        raise ValueError("sensitivity power must be positive")
    return spec.responsivity_a_per_w * sensitivity.watts / q_factor_for_ber(target_ber)


class WindowRates(NamedTuple):
    """Observed (dead-time corrected) in-window click rates in counts/s."""

    signal: float
    dark: float
    noise: float
    live_fraction: float = 1.0

    @property
    def total(self) -> float:
        return self.signal + self.dark + self.noise


def expected_window_rates(mu_arrival: float, spad: SpadSpec, symbol_rate_baud: float,
                          window_fraction: float, noise_rate_in: float = 0.0,
                          sift_factor: float = 0.5,
                          signal_window_acceptance: float = 1.0) -> WindowRates:
    """Mean click rates inside the temporal acceptance window.

    Parameters
    ----------
    mu_arrival : float
        Mean photons per symbol at the detector input.
    noise_rate_in : float
        Temporally uniform noise photons/s at the detector input (Raman plus
        leakage); the SPAD efficiency is applied here.
    sift_factor : float
        Probability that an arriving signal photon is projected onto the
        monitored detector.  With a single detector and uniformly random
        states this is 1/2.

    Notes
    -----
    The detector is blinded by every click, in or out of the window, so the
    live fraction ``1 / (1 + R_all * tau)`` uses the full click rate and
    scales all three in-window rates alike.
    """
    if not 0.0 < window_fraction <= 1.0:
        raise ValueError("window fraction must lie in (0, 1]")
    if min(mu_arrival, symbol_rate_baud, noise_rate_in, sift_factor) < 0:
        raise ValueError("rates and factors must be non-negative")
    signal_all = mu_arrival * symbol_rate_baud * spad.efficiency * sift_factor
    noise_all = noise_rate_in * spad.efficiency
    full = signal_all + spad.dark_rate_cps + noise_all
    live = 1.0 / (1.0 + full * spad.dead_time_s)
    return WindowRates(
        signal=signal_all * signal_window_acceptance * live,
        dark=spad.dark_rate_cps * window_fraction * live,
        noise=noise_all * window_fraction * live,
        live_fraction=live,
    )

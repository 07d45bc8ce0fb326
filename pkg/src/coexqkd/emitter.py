"""Waveguide SiGe emitter model and transmitter photon budget."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InfeasibleCalibration, OutOfRangeError
from .photonics import (
    FlatTopFilter,
    GaussianSpectrum,
    PowerLevel,
    Wavelength,
    db_to_linear,
    inband_fraction,
    photon_energy,
)

# Fiber-coupled output at the 20 mA operating point, read as -74.9 dBm (32 pW).
DEFAULT_OPERATING_CURRENT_MA = 20.0
DEFAULT_VLI_CURRENT_MA = (0.0, 20.0)
DEFAULT_VLI_POWER_W = (0.0, 32e-12)

QUANTUM_WAVELENGTH = Wavelength.from_nm(1550.12)


@dataclass(frozen=True)
class EmitterVLI:
    """Tabulated drive current (mA) versus fiber-coupled power (W).

    Voltages are optional and carried only for reporting.
    """

    current_ma: tuple[float, ...] = DEFAULT_VLI_CURRENT_MA
    power_w: tuple[float, ...] = DEFAULT_VLI_POWER_W
    voltage_v: tuple[float, ...] | None = None

    def __post_init__(self):
        cur = np.asarray(self.current_ma, dtype=float)
        pwr = np.asarray(self.power_w, dtype=float)
        if cur.ndim != 1 or cur.shape != pwr.shape or cur.size < 2:
            raise ValueError("VLI table needs at least two (current, power) pairs of equal length")
        if np.any(np.diff(cur) <= 0):
            raise ValueError("VLI currents must be strictly increasing")
        if np.any(pwr < 0):
            raise ValueError("VLI powers must be non-negative")
        if self.voltage_v is not None and len(self.voltage_v) != cur.size:
            raise ValueError("voltage column length does not match the current column")

    def power_at(self, i_f_ma: float) -> float:
        lo, hi = self.current_ma[0], self.current_ma[-1]
        if not lo <= i_f_ma <= hi:
            raise OutOfRangeError(
                f"forward current {i_f_ma} mA outside the tabulated range [{lo}, {hi}] mA"
            )
        return float(np.interp(i_f_ma, self.current_ma, self.power_w))


@dataclass(frozen=True)
class EmitterSpec:
    vli: EmitterVLI = field(default_factory=EmitterVLI)
    spectrum_center: Wavelength = Wavelength.from_nm(1548.0)
    spectrum_fwhm_nm: float = 58.0

    def __post_init__(self):
        if not self.spectrum_fwhm_nm > 0:
            raise ValueError("emission FWHM must be positive")

    def spectrum(self, i_f_ma: float) -> GaussianSpectrum:
        return GaussianSpectrum(self.spectrum_center, self.spectrum_fwhm_nm,
                                output_power(self, i_f_ma))


def default_slicing_filter() -> FlatTopFilter:
    return FlatTopFilter.from_ghz(QUANTUM_WAVELENGTH, 200.0)


@dataclass(frozen=True)
class TxBudget:
    """Losses between the emitter and the modulator output.

    ``modulator_insertion_loss_db`` lumps the modulator, patch cords and any
    other unitemized transmitter loss; normally it comes from
    :func:`calibrate_tx_loss`.
    """

    slicing_filter: FlatTopFilter = field(default_factory=default_slicing_filter)
    modulator_insertion_loss_db: float = 0.0
    symbol_rate_baud: float = 1e8

    def __post_init__(self):
        if self.modulator_insertion_loss_db < 0:
            raise ValueError("modulator insertion loss must be >= 0 dB")
        if not self.symbol_rate_baud > 0:
            raise ValueError("symbol rate must be positive")

    @property
    def wavelength(self) -> Wavelength:
        return self.slicing_filter.center


def output_power(e: EmitterSpec, i_f_ma: float) -> PowerLevel:
    """Piecewise-linear VLI interpolation; no extrapolation past the table."""
    return PowerLevel(e.vli.power_at(i_f_ma))


def _photons_per_symbol(power_w: float, b: TxBudget) -> float:
    return power_w / (photon_energy(b.wavelength) * b.symbol_rate_baud)


def _sliced_power(e: EmitterSpec, b: TxBudget, i_f_ma: float) -> float:
    spectrum = e.spectrum(i_f_ma)
    frac = inband_fraction(spectrum, b.slicing_filter)
    return spectrum.total_power.watts * frac * b.slicing_filter.in_band_transmission


def mu_at_modulator_output(e: EmitterSpec, b: TxBudget, i_f_ma: float) -> float:
    """Mean photon number per symbol at the modulator output."""
    p = _sliced_power(e, b, i_f_ma) * db_to_linear(b.modulator_insertion_loss_db)
    return _photons_per_symbol(p, b)


def mu_to_power(mu: float, wavelength: Wavelength, symbol_rate_baud: float) -> PowerLevel:
    """Average optical power carrying ``mu`` photons per symbol."""
    return PowerLevel(mu * photon_energy(wavelength) * symbol_rate_baud)


def calibrate_tx_loss(e: EmitterSpec, b: TxBudget, target_mu: float, i_f_ma: float) -> float:
    """Lumped modulator loss (dB) that lands exactly on ``target_mu``.

    Raises :class:`InfeasibleCalibration` when the sliced emitter output cannot
    supply ``target_mu`` even with a lossless modulator.
    """
    if not target_mu > 0:
        raise ValueError("target mu must be positive")
    mu_max = mu_at_modulator_output(e, replace(b, modulator_insertion_loss_db=0.0), i_f_ma)
    loss = 10.0 * math.log10(mu_max / target_mu) if mu_max > 0 else -math.inf
    if loss < 0:
        raise InfeasibleCalibration(
            f"target mu {target_mu:g} exceeds the {mu_max:.4g} photons/symbol available "
            f"with a lossless modulator ({-loss:.2f} dB short)",
            step="tx_loss",
            anchor="mu",
        )
    return loss


def mu_headroom_db(mu_actual: float, mu_target: float) -> float:
    """Extra transmit level (dB) needed to move from ``mu_actual`` to ``mu_target``."""
    if not (mu_actual > 0 and mu_target > 0):
        raise ValueError("mean photon numbers must be positive")
    return 10.0 * math.log10(mu_target / mu_actual)

"""Units, spectra and filter primitives.

Canonical internal units are watts, meters, seconds and hertz.  dBm, nm and
GHz only appear at constructor/property boundaries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import constants
from scipy.integrate import trapezoid

C = constants.c  # 299 792 458 m/s, exact
H = constants.h  # 6.62607015e-34 J s, exact

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))

# grid sizes for the fixed trapezoid integrations
PASSBAND_POINTS = 4097
NORMALIZATION_POINTS = 8193


def dbm_to_watts(p_dbm):
    """Convert dBm to watts (``10**(p/10)`` mW).  Works on scalars and arrays."""
    return 1e-3 * np.power(10.0, np.divide(p_dbm, 10.0))


def watts_to_dbm(p_w):
    """Convert watts to dBm.  Zero watts maps to ``-inf``."""
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.divide(p_w, 1e-3))


def db_to_linear(db):
    return 10.0 ** (-db / 10.0)


@dataclass(frozen=True)
class PowerLevel:
    """Optical power, stored in watts."""

    watts: float

    def __post_init__(self):
        if not (self.watts >= 0 and math.isfinite(self.watts)):
            raise ValueError(f"power must be finite and non-negative, got {self.watts} W")

    @classmethod
    def from_dbm(cls, p_dbm: float) -> PowerLevel:
        return cls(dbm_to_watts(p_dbm))

    @property
    def dbm(self) -> float:
        return watts_to_dbm(self.watts)

    @property
    def mw(self) -> float:
        return self.watts * 1e3

    def attenuate(self, loss_db: float) -> PowerLevel:
        return PowerLevel(self.watts * db_to_linear(loss_db))


@dataclass(frozen=True)
class Wavelength:
    meters: float

    def __post_init__(self):
        if not self.meters > 0:
            raise ValueError(f"wavelength must be positive, got {self.meters} m")

    @classmethod
    def from_nm(cls, nm: float) -> Wavelength:
        return cls(nm * 1e-9)

    @property
    def nm(self) -> float:
        return self.meters * 1e9

    @property
    def frequency(self) -> float:
        return C / self.meters


def photon_energy(wavelength: Wavelength) -> float:
    """Photon energy h*c/lambda in joules."""
    return H * C / wavelength.meters


def ghz_to_nm(width_ghz: float, center: Wavelength) -> float:
    """Linearized frequency-to-wavelength width conversion at ``center``."""
    return center.meters**2 * width_ghz * 1e9 / C * 1e9


@dataclass(frozen=True)
class GaussianSpectrum:
    """Gaussian power spectral density in W/nm.

    The density is checked to integrate to ``total_power`` at construction.
    """

    center: Wavelength
    fwhm_nm: float
    total_power: PowerLevel

    def __post_init__(self):
        if not self.fwhm_nm > 0:
            raise ValueError(f"FWHM must be positive, got {self.fwhm_nm} nm")
        grid = np.linspace(self.center.nm - 8 * self.sigma_nm, self.center.nm + 8 * self.sigma_nm,
                           NORMALIZATION_POINTS)
        norm = trapezoid(self.normalized_density(grid), grid)
        if abs(norm - 1.0) > 1e-6:
            raise ArithmeticError(f"spectrum normalization failed: {norm!r}")

    @property
    def sigma_nm(self) -> float:
        return self.fwhm_nm * FWHM_TO_SIGMA

    def normalized_density(self, wavelength_nm):
        """Unit-area density (1/nm)."""
        z = (np.asarray(wavelength_nm, dtype=float) - self.center.nm) / self.sigma_nm
        return np.exp(-0.5 * z * z) / (self.sigma_nm * math.sqrt(2.0 * math.pi))

    def density(self, wavelength_nm):
        """Power spectral density in W/nm."""
        return self.total_power.watts * self.normalized_density(wavelength_nm)


@dataclass(frozen=True)
class FlatTopFilter:
    """Ideal rectangular bandpass with finite out-of-band isolation.

    ``out_of_band_isolation_db`` may be ``math.inf`` for an ideal filter.
    """

    center: Wavelength
    passband_nm: float
    insertion_loss_db: float = 0.0
    out_of_band_isolation_db: float = 40.0

    def __post_init__(self):
        if not self.passband_nm > 0:
            raise ValueError("passband width must be positive")
        if self.insertion_loss_db < 0:
            raise ValueError("insertion loss must be >= 0 dB")
        if not self.out_of_band_isolation_db > 0:
            raise ValueError("out-of-band isolation must be > 0 dB")

    @classmethod
    def from_ghz(cls, center: Wavelength, width_ghz: float, **kwargs) -> FlatTopFilter:
        return cls(center, ghz_to_nm(width_ghz, center), **kwargs)

    @property
    def edges_nm(self) -> tuple[float, float]:
        half = 0.5 * self.passband_nm
        return self.center.nm - half, self.center.nm + half

    @property
    def in_band_transmission(self) -> float:
        return db_to_linear(self.insertion_loss_db)

    @property
    def out_of_band_transmission(self) -> float:
        return db_to_linear(self.insertion_loss_db + self.out_of_band_isolation_db)

    def transmission(self, wavelength_nm):
        lo, hi = self.edges_nm
        lam = np.asarray(wavelength_nm, dtype=float)
        inside = (lam >= lo) & (lam < hi)
        return np.where(inside, self.in_band_transmission, self.out_of_band_transmission)


def inband_fraction(spectrum: GaussianSpectrum, flt: FlatTopFilter) -> float:
    """Fraction of the spectrum's power passed by ``flt``, excluding insertion loss.

    The passband is integrated with a fixed trapezoid grid; everything outside
    it is weighted by the isolation floor.  A filter far from the spectrum
    therefore returns the isolation floor rather than zero.
    """
    lo, hi = flt.edges_nm
    grid = np.linspace(lo, hi, PASSBAND_POINTS)
    captured = float(trapezoid(spectrum.normalized_density(grid), grid))
    captured = min(max(captured, 0.0), 1.0)
    floor = db_to_linear(flt.out_of_band_isolation_db)
    return captured + floor * (1.0 - captured)

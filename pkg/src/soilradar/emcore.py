"""Electromagnetic primitives: permittivity, Fresnel reflectivity, the Topp
moisture conversion, and frequency grids.

Conventions used throughout the toolkit:
    - relative permittivity is written eps = eps' + j*eps'' with eps'' >= 0
      (loss stored as a positive magnitude, decaying-wave convention),
    - complex square roots use the principal branch, which keeps
      Im[sqrt(eps)] >= 0 for lossy media,
    - frequencies in Hz, lengths in m, angles in rad.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoSolutionError

SPEED_OF_LIGHT = 299_792_458.0  # m/s

DEFAULT_BAND_LOW_HZ = 200e6
DEFAULT_BAND_HIGH_HZ = 900e6

# Empirical cubic mapping permittivity -> volumetric water content
# (Topp et al. 1980 coefficients; overridable for other soil calibrations).
DEFAULT_TOPP_COEFFICIENTS = (-5.3e-2, 2.92e-2, -5.5e-4, 4.3e-6)

# Bracketing interval for the inverse mapping. The upper limit is chosen so
# the polynomial covers vwc up to ~0.557, letting the round-trip identity
# hold on vwc in [0.02, 0.55].
_TOPP_EPS_LO = 1.5
_TOPP_EPS_HI = 48.0


@dataclass(frozen=True)
class ComplexPermittivity:
    """Relative permittivity; imag_part is the positive loss magnitude."""

    real_part: float
    imag_part: float = 0.0

    def __post_init__(self):
        if not self.real_part >= 1.0:
            raise ValueError(f"real permittivity must be >= 1, got {self.real_part}")
        if not self.imag_part >= 0.0:
            raise ValueError(f"imaginary permittivity must be >= 0, got {self.imag_part}")

    @property
    def as_complex(self) -> complex:
        return complex(self.real_part, self.imag_part)

    @classmethod
    def from_loss_tangent(cls, real_part: float, loss_tangent: float) -> "ComplexPermittivity":
        return cls(real_part, real_part * loss_tangent)


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Strictly increasing frequency samples inside a band."""

    frequencies: np.ndarray
    band_low_hz: float = DEFAULT_BAND_LOW_HZ
    band_high_hz: float = DEFAULT_BAND_HIGH_HZ

    def __post_init__(self):
        freqs = np.asarray(self.frequencies, dtype=float)
        object.__setattr__(self, "frequencies", freqs)
        if freqs.size == 0:
            raise ValueError("frequency grid must be non-empty")
        if np.any(np.diff(freqs) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if freqs[0] < self.band_low_hz or freqs[-1] > self.band_high_hz:
            raise ValueError("frequencies outside band limits")

    @classmethod
    def linspace(cls, band_low_hz: float = DEFAULT_BAND_LOW_HZ,
                 band_high_hz: float = DEFAULT_BAND_HIGH_HZ, n: int = 100) -> "FrequencyGrid":
        return cls(np.linspace(band_low_hz, band_high_hz, n), band_low_hz, band_high_hz)

    def __len__(self) -> int:
        return int(self.frequencies.size)


@dataclass(frozen=True)
class SoilMoisture:
    """Volumetric water content as a fraction of soil volume."""

    vwc: float

    def __post_init__(self):
        if not 0.0 <= self.vwc <= 1.0:
            raise ValueError(f"vwc must lie in [0, 1], got {self.vwc}")


def fresnel_gamma(eps: complex | np.ndarray) -> float | np.ndarray:
    """Normal-incidence power reflectivity |(1 - sqrt(eps)) / (1 + sqrt(eps))|^2.

    Vectorized backend for :func:`fresnel_reflectivity`; accepts complex arrays.
    """
    root = np.sqrt(np.asarray(eps, dtype=complex))
    return np.abs((1.0 - root) / (1.0 + root)) ** 2


def fresnel_reflectivity(eps_s: ComplexPermittivity) -> float:
    """Fresnel reflectivity at normal incidence of a half-space with permittivity eps_s."""
    return float(fresnel_gamma(eps_s.as_complex))


def topp_vwc_values(eps_real, coefficients=DEFAULT_TOPP_COEFFICIENTS):
    """Evaluate the Topp polynomial and clamp to the physical [0, 1] range.

    Negative polynomial output at very low permittivity is an artifact of the
    empirical fit below its calibration range and is clamped to 0.
    """
    e = np.asarray(eps_real, dtype=float)
    a0, a1, a2, a3 = coefficients
    theta = a0 + a1 * e + a2 * e**2 + a3 * e**3
    return np.clip(theta, 0.0, 1.0)


def topp_vwc(eps_real: float, coefficients=DEFAULT_TOPP_COEFFICIENTS) -> SoilMoisture:
    """Convert real soil permittivity to volumetric water content."""
    if not eps_real >= 1.0:
        raise ValueError(f"permittivity must be >= 1, got {eps_real}")
    return SoilMoisture(float(topp_vwc_values(eps_real, coefficients)))


def topp_permittivity(vwc: SoilMoisture | float,
                      coefficients=DEFAULT_TOPP_COEFFICIENTS) -> float:
    """Invert the Topp conversion by bisection on eps in [1.5, 48].

    Raises NoSolutionError when the target moisture exceeds the polynomial
    maximum over the bracketing interval.
    """
    target = vwc.vwc if isinstance(vwc, SoilMoisture) else float(vwc)
    if not 0.0 <= target <= 0.6:
        raise ValueError(f"vwc must lie in [0, 0.6], got {target}")
    lo, hi = _TOPP_EPS_LO, _TOPP_EPS_HI
    f_lo = float(topp_vwc_values(lo, coefficients)) - target
    f_hi = float(topp_vwc_values(hi, coefficients)) - target
    if f_lo >= 0.0:
        # Clamped flat region at the dry end; lowest bracketing value applies.
        return lo
    if f_hi < 0.0:
        raise NoSolutionError(
            f"vwc={target} exceeds the Topp polynomial maximum on [{lo}, {hi}]")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if float(topp_vwc_values(mid, coefficients)) - target < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    return 0.5 * (lo + hi)


def wavenumber(frequency_hz):
    """Free-space wavenumber k = 2*pi*f/c in rad/m. Accepts scalars or arrays."""
    f = np.asarray(frequency_hz, dtype=float)
    if np.any(f <= 0.0):
        raise ValueError("frequency must be positive")
    k = 2.0 * np.pi * f / SPEED_OF_LIGHT
    return float(k) if np.isscalar(frequency_hz) else k

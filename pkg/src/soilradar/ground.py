"""Rough-surface ground scattering and the combined scene forward model.

The coherent (specular) return follows the Kirchhoff approximation:

    sigma_coh = A * Gamma / beta_c^2 * exp(-16 pi^2 s^2 f^2 / c^2)
                                     * exp(-theta_i^2 / beta_c^2)

with Gamma the normal-incidence Fresnel reflectivity, s the rms roughness
height, beta_c a scattering-beamwidth tuning parameter and A the illuminated
area. The angular exponent is implemented with the decaying sign: the
coherent lobe must fall off away from specular, which is also what the
measured angle dependence shows.

A first-order small-perturbation (SPM) backscatter term with an exponential
correlation function stands in for the diffuse component. It is only used for
coherent-vs-incoherent comparisons and never enters the inversion, which
matches the nadir geometry where the coherent term dominates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .canopy import CanopyDescriptor, transmissivity
from .emcore import (SPEED_OF_LIGHT, ComplexPermittivity, FrequencyGrid,
                     fresnel_gamma, topp_permittivity)
from .errors import ValidityError

DEFAULT_SCATTERING_BEAMWIDTH = math.radians(5.0)
DEFAULT_EFFECTIVE_BEAMWIDTH = math.radians(2.0)
DEFAULT_ANTENNA_BEAMWIDTH = math.radians(60.0)
DEFAULT_ROUGHNESS_M = 0.01
DEFAULT_SOIL_LOSS_TANGENT = 0.15

MAX_SPM_KS = 0.3


@dataclass(frozen=True)
class SoilDescriptor:
    """Soil half-space: permittivity, rms roughness height s (m), and the
    scattering beamwidth beta_c (rad). correlation_length (m) feeds only the
    incoherent term; None means the 10*s default."""

    permittivity: ComplexPermittivity
    roughness_height: float = DEFAULT_ROUGHNESS_M
    scattering_beamwidth: float = DEFAULT_SCATTERING_BEAMWIDTH
    correlation_length: float | None = None

    def __post_init__(self):
        if self.roughness_height < 0:
            raise ValueError("roughness height must be >= 0")
        if not self.scattering_beamwidth > 0:
            raise ValueError("scattering beamwidth must be positive")

    @classmethod
    def default(cls, vwc: float = 0.20) -> "SoilDescriptor":
        """Moderately moist soil with s = 1 cm and beta_c = 5 deg."""
        eps_real = topp_permittivity(vwc)
        eps = ComplexPermittivity.from_loss_tangent(eps_real, DEFAULT_SOIL_LOSS_TANGENT)
        return cls(eps)

    def with_permittivity(self, eps: ComplexPermittivity) -> "SoilDescriptor":
        return SoilDescriptor(eps, self.roughness_height, self.scattering_beamwidth,
                              self.correlation_length)

    def with_roughness(self, s: float) -> "SoilDescriptor":
        return SoilDescriptor(self.permittivity, s, self.scattering_beamwidth,
                              self.correlation_length)


@dataclass(frozen=True)
class ViewGeometry:
    """Nadir viewing geometry: altitude R (m) and effective coherent
    beamwidth theta_e (rad), bounded by the antenna half-power beamwidth."""

    altitude: float
    effective_beamwidth: float = DEFAULT_EFFECTIVE_BEAMWIDTH
    antenna_halfpower_beamwidth: float = DEFAULT_ANTENNA_BEAMWIDTH

    def __post_init__(self):
        if not self.altitude > 0:
            raise ValueError("altitude must be positive")
        if not 0 < self.effective_beamwidth <= self.antenna_halfpower_beamwidth:
            raise ValueError("effective beamwidth must lie in (0, antenna beamwidth]")

    def with_altitude(self, altitude: float) -> "ViewGeometry":
        return ViewGeometry(altitude, self.effective_beamwidth,
                            self.antenna_halfpower_beamwidth)

    def with_effective_beamwidth(self, theta_e: float) -> "ViewGeometry":
        return ViewGeometry(self.altitude, theta_e, self.antenna_halfpower_beamwidth)


@dataclass(frozen=True, eq=False)
class RcsSpectrum:
    """Radar cross section vs frequency in linear m^2."""

    grid: FrequencyGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.shape != (len(self.grid),):
            raise ValueError("values must match the grid length")
        if np.any(vals < 0):
            raise ValueError("RCS values must be >= 0")

    def to_dbsm(self) -> np.ndarray:
        """10 log10 of the linear values; zeros map to -inf."""
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(self.values)

    def scaled(self, factor: float) -> "RcsSpectrum":
        return RcsSpectrum(self.grid, self.values * factor)


def dbsm_to_linear(dbsm) -> np.ndarray:
    return np.power(10.0, np.asarray(dbsm, dtype=float) / 10.0)


def effective_area(view: ViewGeometry) -> float:
    """Effective reflective area A = pi (R tan(theta_e/2))^2 of the nadir ring."""
    radius = view.altitude * math.tan(view.effective_beamwidth / 2.0)
    return math.pi * radius**2


def coherent_rcs(soil: SoilDescriptor, frequency_hz, theta_i: float,
                 area: float) -> float | np.ndarray:
    """Coherent Kirchhoff RCS (m^2). Vectorized over frequency."""
    if not area > 0:
        raise ValueError("illuminated area must be positive")
    f = np.asarray(frequency_hz, dtype=float)
    gamma = fresnel_gamma(soil.permittivity.as_complex)
    beta_sq = soil.scattering_beamwidth**2
    rough = np.exp(-16.0 * np.pi**2 * soil.roughness_height**2 * f**2
                   / SPEED_OF_LIGHT**2)
    angular = math.exp(-(theta_i**2) / beta_sq)
    sigma = area * gamma / beta_sq * rough * angular
    return float(sigma) if np.isscalar(frequency_hz) else sigma


def incoherent_rcs(soil: SoilDescriptor, frequency_hz: float, theta_i: float,
                   area: float) -> float:
    """First-order SPM backscatter times the illuminated area (m^2).

    sigma0 = 8 k^4 s^2 cos^4(theta) |alpha_hh|^2 W(2 k sin theta) with the
    exponential-ACF roughness spectrum W(kappa) = L^2/(2 pi) (1+(kappa L)^2)^-1.5.
    Valid for k*s < 0.3.
    """
    if not area > 0:
        raise ValueError("illuminated area must be positive")
    s = soil.roughness_height
    if s == 0.0:
        return 0.0
    k = 2.0 * np.pi * frequency_hz / SPEED_OF_LIGHT
    if k * s >= MAX_SPM_KS:
        raise ValidityError(f"SPM out of range: k*s = {k * s:.3f} >= {MAX_SPM_KS}")
    corr_len = soil.correlation_length if soil.correlation_length else 10.0 * s
    eps = soil.permittivity.as_complex
    cos_t = math.cos(theta_i)
    sin_t = math.sin(theta_i)
    alpha_hh = (eps - 1.0) / (cos_t + np.sqrt(eps - sin_t**2)) ** 2
    kappa = 2.0 * k * sin_t
    spectrum = corr_len**2 / (2.0 * np.pi) * (1.0 + (kappa * corr_len) ** 2) ** -1.5
    sigma0 = 8.0 * k**4 * s**2 * cos_t**4 * abs(alpha_hh) ** 2 * spectrum
    return float(sigma0 * area)


def scene_rcs(canopy: CanopyDescriptor, soil: SoilDescriptor, view: ViewGeometry,
              grid: FrequencyGrid) -> RcsSpectrum:
    """Forward-model scene RCS: sigma_s(f) = T^2(theta_e, f) * sigma(theta_e, f).

    Transmissivity and the coherent ground term are both evaluated at the
    single effective angle theta_e over the effective area (small-footprint
    approximation). With an empty canopy the one-way transmissivity is exactly
    1.0 and the output equals the bare-soil coherent spectrum bit for bit.
    """
    theta = view.effective_beamwidth
    area = effective_area(view)
    values = np.empty(len(grid))
    for i, f in enumerate(grid.frequencies):
        t_one_way = transmissivity(canopy, f, theta)
        values[i] = t_one_way**2 * coherent_rcs(soil, float(f), theta, area)
    return RcsSpectrum(grid, values)


def rcs_vs_incidence(soil: SoilDescriptor, canopy: CanopyDescriptor,
                     view: ViewGeometry, frequency_hz: float,
                     theta_range) -> list[tuple[float, float, float]]:
    """Tabulate canopy-attenuated (theta_i, sigma_coh, sigma_incoh) rows.

    Used for incidence-angle plots showing where the coherent term dominates.
    """
    area = effective_area(view)
    rows = []
    for theta in np.asarray(theta_range, dtype=float):
        t_sq = transmissivity(canopy, frequency_hz, float(theta)) ** 2
        coh = t_sq * coherent_rcs(soil, frequency_hz, float(theta), area)
        incoh = t_sq * incoherent_rcs(soil, frequency_hz, float(theta), area)
        rows.append((float(theta), float(coh), float(incoh)))
    return rows

"""Joint soil-canopy inversion by exhaustive grid search, soil-roughness
calibration, and sensitivity sweeps.

The retrieval matches the measured RCS spectrum against the forward model over
a 500 x 500 grid of (soil, canopy) permittivities, minimizing the sum of
squared linear-RCS differences across frequency. The imaginary permittivity
parts are tied to the real parts through per-layer loss tangents so the
search stays two-dimensional.

The forward model factorizes as sigma_s(f; eps_s, eps_c) = K(eps_s, f) *
T(eps_c, f): the coherent ground term does not depend on the canopy and the
two-way transmissivity does not depend on the soil. Both tables are
precomputed per unique (eps, f) pair, reducing the 250,000-cell scan to two
matrix products while remaining an exhaustive evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .canopy import (DEFAULT_CANOPY_LOSS_TANGENT, CanopyDescriptor, _leaf_unit,
                     _mean_axis_coupling_sq)
from .emcore import (SPEED_OF_LIGHT, ComplexPermittivity, SoilMoisture,
                     fresnel_gamma, topp_vwc_values, wavenumber)
from .errors import BandError, ValidityError
from .ground import (DEFAULT_SOIL_LOSS_TANGENT, RcsSpectrum, SoilDescriptor,
                     ViewGeometry, coherent_rcs, effective_area)

DEFAULT_SOIL_RANGE = (2.0, 40.0)
DEFAULT_CANOPY_RANGE = (1.5, 40.0)
DEFAULT_GRID_POINTS = 500

ROUGHNESS_SCAN_MAX_M = 0.05
ROUGHNESS_SCAN_STEP_M = 5e-4


@dataclass(frozen=True, eq=False)
class SearchConfig:
    """Grid-search configuration: permittivity axes, loss model, sub-band."""

    soil_eps: np.ndarray = field(
        default_factory=lambda: np.linspace(*DEFAULT_SOIL_RANGE, DEFAULT_GRID_POINTS))
    canopy_eps: np.ndarray = field(
        default_factory=lambda: np.linspace(*DEFAULT_CANOPY_RANGE, DEFAULT_GRID_POINTS))
    soil_loss_tangent: float = DEFAULT_SOIL_LOSS_TANGENT
    canopy_loss_tangent: float = DEFAULT_CANOPY_LOSS_TANGENT
    sub_band: tuple[float, float] | None = None
    canopy_modeling_enabled: bool = True
    residual_in_db: bool = False  # experimentation only; linear m^2 is the contract

    def __post_init__(self):
        for name in ("soil_eps", "canopy_eps"):
            axis = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, axis)
            if axis.size == 0:
                raise ValueError(f"{name} grid must be non-empty")
            if axis.size > 1 and np.any(np.diff(axis) <= 0):
                raise ValueError(f"{name} grid must be strictly increasing")

    def soil_step(self) -> float:
        axis = self.soil_eps
        return float(axis[1] - axis[0]) if axis.size > 1 else 0.0


@dataclass(frozen=True, eq=False)
class RetrievalResult:
    """Joint permittivity estimate with residual and search diagnostics."""

    soil_permittivity: ComplexPermittivity
    canopy_permittivity: ComplexPermittivity
    vwc: SoilMoisture
    residual: float  # sum of squared RCS error, m^4
    frequencies: np.ndarray
    simulated: np.ndarray
    measured: np.ndarray
    soil_index: int
    canopy_index: int
    soil_boundary_hit: bool
    canopy_boundary_hit: bool

    @property
    def boundary_hit(self) -> bool:
        return self.soil_boundary_hit or self.canopy_boundary_hit


def _canopy_response_factor(canopy: CanopyDescriptor, eps: np.ndarray) -> np.ndarray:
    """Per-canopy-permittivity factor Q such that kappa_e(f) = k(f) * Q.

    Q = N_s V_s Im[(eps-1) 2/(eps+1)] + N_l V_l Im[(eps-1)(1 - mu2 (1-1/eps))]
    with mu2 the orientation moment <(e.n)^2> of the leaf distribution. Exact
    for the volume-integral amplitudes, whose orientation dependence is affine
    in (e.n)^2.
    """
    eps = np.asarray(eps, dtype=complex)
    q = np.zeros(eps.shape)
    if canopy.stalk_density > 0 and canopy.stalk_geometry is not None:
        v_stalk = (math.pi * canopy.stalk_geometry.radius**2
                   * canopy.stalk_geometry.length)
        q = q + canopy.stalk_density * v_stalk * np.imag(
            (eps - 1.0) * 2.0 / (eps + 1.0))
    if canopy.leaf_density > 0:
        n_segments, v_leaf = _leaf_unit(canopy)
        mu2 = _mean_axis_coupling_sq(canopy.leaf_orientation)
        u = 1.0 - mu2 * (1.0 - 1.0 / eps)
        q = q + canopy.leaf_density * v_leaf * np.imag((eps - 1.0) * u)
    return q


def _ground_table(soil_eps: np.ndarray, loss_tangent: float,
                  soil_template: SoilDescriptor, view: ViewGeometry,
                  frequencies: np.ndarray) -> np.ndarray:
    """K[i, m]: coherent ground RCS for each (soil eps, frequency) pair."""
    eps = soil_eps * (1.0 + 1j * loss_tangent)
    gamma = fresnel_gamma(eps)
    theta = view.effective_beamwidth
    beta_sq = soil_template.scattering_beamwidth**2
    area = effective_area(view)
    rough = np.exp(-16.0 * np.pi**2 * soil_template.roughness_height**2
                   * frequencies**2 / SPEED_OF_LIGHT**2)
    angular = math.exp(-(theta**2) / beta_sq)
    return gamma[:, None] * (area / beta_sq * angular) * rough[None, :]


def _canopy_table(canopy_eps: np.ndarray, loss_tangent: float,
                  canopy: CanopyDescriptor | None, view: ViewGeometry,
                  frequencies: np.ndarray,
                  enabled: bool) -> np.ndarray:
    """T[j, m]: two-way canopy power transmissivity for each (eps_c, f) pair."""
    if (not enabled or canopy is None or canopy.height == 0.0
            or (canopy.stalk_density == 0.0 and canopy.leaf_density == 0.0)):
        return np.ones((canopy_eps.size, frequencies.size))
    eps = canopy_eps * (1.0 + 1j * loss_tangent)
    q = _canopy_response_factor(canopy, eps)
    k = wavenumber(frequencies)
    path = 2.0 * canopy.height / math.cos(view.effective_beamwidth)
    return np.exp(-np.outer(q, k) * path)


def forward_rcs_values(frequencies, soil: SoilDescriptor,
                       canopy: CanopyDescriptor | None,
                       view: ViewGeometry) -> np.ndarray:
    """Scene RCS at arbitrary frequencies via the factorized forward model.

    Matches ground.scene_rcs on any frequency grid; used by the synthetic
    simulator, which needs the model on the dense FFT axis.
    """
    f = np.atleast_1d(np.asarray(frequencies, dtype=float))
    theta = view.effective_beamwidth
    area = effective_area(view)
    sigma = coherent_rcs(soil, f, theta, area)
    if canopy is not None and canopy.height > 0.0 and (
            canopy.stalk_density > 0.0 or canopy.leaf_density > 0.0):
        eps = np.array([canopy.leaf_geometry.permittivity.as_complex])
        q = _canopy_response_factor(canopy, eps)[0]
        t_two_way = np.exp(-2.0 * q * wavenumber(f) * canopy.height / math.cos(theta))
        sigma = sigma * t_two_way
    return sigma


def _select_band(measured: RcsSpectrum, cfg: SearchConfig):
    f = measured.grid.frequencies
    if cfg.sub_band is None:
        return f, measured.values
    lo, hi = cfg.sub_band
    mask = (f >= lo) & (f <= hi)
    if not np.any(mask):
        raise BandError(f"sub-band [{lo:.3g}, {hi:.3g}] Hz selects no frequencies")
    return f[mask], measured.values[mask]


def retrieve(measured: RcsSpectrum, canopy_structure: CanopyDescriptor | None,
             soil_template: SoilDescriptor, view: ViewGeometry,
             cfg: SearchConfig | None = None) -> RetrievalResult:
    """Jointly estimate soil and canopy permittivity from an RCS spectrum.

    Exhaustively evaluates the (soil, canopy) permittivity grid, returning the
    global minimizer of the summed squared spectrum error. Ties break toward
    the lowest soil then lowest canopy permittivity (row-major argmin on the
    soil-major residual array). VWC follows from the Topp conversion of the
    retrieved real soil permittivity. When canopy modeling is disabled or the
    canopy is empty, the canopy axis is inert: the result reports the lowest
    canopy grid value and leaves its boundary flag clear.
    """
    cfg = cfg or SearchConfig()
    freqs, meas = _select_band(measured, cfg)
    if not np.any(meas > 0):
        raise ValidityError("measured spectrum is all zero")
    k_table = _ground_table(cfg.soil_eps, cfg.soil_loss_tangent, soil_template,
                            view, freqs)
    # An empty or disabled canopy makes every canopy row identical; collapse
    # the axis to one row so the tie resolves to the lowest eps_c exactly
    # instead of through float-summation jitter across equal columns.
    canopy_inert = (not cfg.canopy_modeling_enabled or canopy_structure is None
                    or canopy_structure.height == 0.0
                    or (canopy_structure.stalk_density == 0.0
                        and canopy_structure.leaf_density == 0.0))
    if canopy_inert:
        t_table = np.ones((1, freqs.size))
    else:
        t_table = _canopy_table(cfg.canopy_eps, cfg.canopy_loss_tangent,
                                canopy_structure, view, freqs, True)
    if cfg.residual_in_db:
        with np.errstate(divide="ignore"):
            meas_v = 10.0 * np.log10(meas)
            k_db = 10.0 * np.log10(k_table)
            t_db = 10.0 * np.log10(t_table)
        residuals = ((k_db[:, None, :] + t_db[None, :, :]
                      - meas_v[None, None, :]) ** 2).sum(axis=2)
    else:
        # sum_f (K T - m)^2 = (K^2)(T^2)' - 2 (K m) T' + sum m^2
        residuals = ((k_table**2) @ (t_table**2).T
                     - 2.0 * (k_table * meas) @ t_table.T
                     + float(meas @ meas))
    flat = int(np.argmin(residuals))
    i, j_table = divmod(flat, t_table.shape[0])
    j = 0 if canopy_inert else j_table
    eps_s = ComplexPermittivity.from_loss_tangent(float(cfg.soil_eps[i]),
                                                  cfg.soil_loss_tangent)
    eps_c = ComplexPermittivity.from_loss_tangent(float(cfg.canopy_eps[j]),
                                                  cfg.canopy_loss_tangent)
    simulated = k_table[i] * t_table[j_table]
    residual = float(np.sum((simulated - meas) ** 2))
    return RetrievalResult(
        soil_permittivity=eps_s,
        canopy_permittivity=eps_c,
        vwc=SoilMoisture(float(topp_vwc_values(cfg.soil_eps[i]))),
        residual=residual,
        frequencies=freqs,
        simulated=simulated,
        measured=meas,
        soil_index=i,
        canopy_index=j,
        soil_boundary_hit=i in (0, cfg.soil_eps.size - 1),
        canopy_boundary_hit=(not canopy_inert
                             and j in (0, cfg.canopy_eps.size - 1)),
    )


@dataclass(frozen=True)
class RoughnessCalibration:
    """Result of the bare-soil roughness scan."""

    roughness_m: float
    vwc_error: float
    unique: bool


def calibrate_roughness(bare_scan_rcs: RcsSpectrum, known_vwc: SoilMoisture | float,
                        view: ViewGeometry, cfg: SearchConfig | None = None,
                        soil_template: SoilDescriptor | None = None,
                        s_max: float = ROUGHNESS_SCAN_MAX_M,
                        s_step: float = ROUGHNESS_SCAN_STEP_M) -> RoughnessCalibration:
    """Scan roughness height to minimize the bare-soil moisture error.

    Runs the retrieval (canopy modeling disabled) for each candidate s in
    [0, s_max] and returns the s minimizing |retrieved - known| VWC. A
    non-unique minimum (the quantized VWC error ties across candidates) is
    flagged rather than raised; the lowest tying s is returned.
    """
    cfg = cfg or SearchConfig()
    target = known_vwc.vwc if isinstance(known_vwc, SoilMoisture) else float(known_vwc)
    template = soil_template or SoilDescriptor.default()
    bare_cfg = SearchConfig(cfg.soil_eps, cfg.canopy_eps, cfg.soil_loss_tangent,
                            cfg.canopy_loss_tangent, cfg.sub_band,
                            canopy_modeling_enabled=False)
    candidates = np.arange(0.0, s_max + s_step / 2.0, s_step)
    errors = np.empty(candidates.size)
    for idx, s in enumerate(candidates):
        result = retrieve(bare_scan_rcs, None, template.with_roughness(float(s)),
                          view, bare_cfg)
        errors[idx] = abs(result.vwc.vwc - target)
    best = int(np.argmin(errors))
    ties = int(np.sum(errors == errors[best]))
    return RoughnessCalibration(float(candidates[best]), float(errors[best]),
                                unique=ties == 1)


def sweep_effective_beamwidth(measured: RcsSpectrum,
                              structure: CanopyDescriptor | None,
                              soil_template: SoilDescriptor, view: ViewGeometry,
                              cfg: SearchConfig | None, theta_values,
                              true_vwc: float) -> list[tuple[float, float, float]]:
    """Retrieval error as a function of the assumed effective beamwidth.

    Returns (theta_e_rad, vwc, vwc_error) rows for plotting; the error
    minimum marks the angular extent of the coherent ground lobe.
    """
    rows = []
    for theta in np.asarray(theta_values, dtype=float):
        result = retrieve(measured, structure, soil_template,
                          view.with_effective_beamwidth(float(theta)), cfg)
        rows.append((float(theta), result.vwc.vwc,
                     abs(result.vwc.vwc - true_vwc)))
    return rows


def sweep_bandwidth(measured: RcsSpectrum, structure: CanopyDescriptor | None,
                    soil_template: SoilDescriptor, view: ViewGeometry,
                    cfg: SearchConfig | None, sub_bands,
                    true_vwc: float) -> list[tuple[float, float, float, float]]:
    """Retrieval error per frequency sub-band.

    sub_bands is an iterable of (f_lo, f_hi) in Hz; each must intersect the
    measured grid. Returns (f_lo, f_hi, vwc, vwc_error) rows.
    """
    cfg = cfg or SearchConfig()
    rows = []
    for lo, hi in sub_bands:
        band_cfg = SearchConfig(cfg.soil_eps, cfg.canopy_eps,
                                cfg.soil_loss_tangent, cfg.canopy_loss_tangent,
                                (float(lo), float(hi)),
                                cfg.canopy_modeling_enabled)
        result = retrieve(measured, structure, soil_template, view, band_cfg)
        rows.append((float(lo), float(hi), result.vwc.vwc,
                     abs(result.vwc.vwc - true_vwc)))
    return rows


def sweep_altitude(scans, cal, structure: CanopyDescriptor | None,
                   soil_template: SoilDescriptor, view: ViewGeometry,
                   cfg: SearchConfig | None = None) -> list[tuple[float, float]]:
    """Full pipeline per scan: gate, transform, calibrate, invert.

    Each scan is processed at its own gate-derived range; the view altitude is
    updated accordingly so the effective footprint tracks the platform.
    Returns (range_m, vwc) rows.
    """
    from .dsp import channel_response, isolate_ground_return, measured_rcs

    rows = []
    for scan in scans:
        segment = isolate_ground_return(scan)
        resp = channel_response(segment, cal.grid)
        r = segment.peak_range
        spectrum = measured_rcs(resp, r, cal)
        result = retrieve(spectrum, structure, soil_template,
                          view.with_altitude(r), cfg)
        rows.append((float(r), result.vwc.vwc))
    return rows


def sweep_canopy_ablation(measured: RcsSpectrum, structure: CanopyDescriptor,
                          soil_template: SoilDescriptor, view: ViewGeometry,
                          cfg: SearchConfig | None,
                          true_vwc: float) -> list[tuple[bool, float, float]]:
    """Retrieval with canopy modeling enabled vs disabled on the same spectrum."""
    cfg = cfg or SearchConfig()
    rows = []
    for enabled in (True, False):
        run_cfg = SearchConfig(cfg.soil_eps, cfg.canopy_eps,
                               cfg.soil_loss_tangent, cfg.canopy_loss_tangent,
                               cfg.sub_band, canopy_modeling_enabled=enabled)
        result = retrieve(measured, structure, soil_template, view, run_cfg)
        rows.append((enabled, result.vwc.vwc, abs(result.vwc.vwc - true_vwc)))
    return rows

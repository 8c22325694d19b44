"""Built-in synthetic scene simulator.

Generates radar A-scans whose gated ground echo carries a prescribed scene
RCS through a prescribed hardware shaping, so the full pipeline
(gate -> response -> calibrate -> RCS -> invert) can be validated end to end
against known truth. Also provides synthetic LiDAR point clouds (row crops,
tilted ground, ray-cast disk canopies) for the canopy-structure pipeline.

The radar-equation bookkeeping is chosen self-consistently with the
calibration algebra: an echo from a target of RCS sigma at range R is shaped
by

    H(f) = H_hw(f) * sqrt(sigma(f)) / R^2

on top of the Ricker spectrum, where H_hw is the injected hardware curve.
Any frequency factor common to reference and scene echoes cancels between
the calibration (C = f^2 r^4 |G_r|^2 / sigma_r) and the measurement
(sigma_m = f^2 R^4 |G|^2 / C), so the bookkeeping needs no explicit 1/f;
leaving it out keeps the echoes time-compact (polynomial spectral shadings
are time derivatives) so the fixed-length gate captures them without
truncation bias. Applying the derived calibration to any scene scan then
recovers sigma(f) essentially exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .canopy import (DEFAULT_CANOPY_LOSS_TANGENT, DEFAULT_LEAF_THICKNESS,
                     CanopyDescriptor, CylinderGeometry, DiskGeometry,
                     OrientationDistribution)
from .dsp import DEFAULT_CENTER_FREQUENCY, DEFAULT_SAMPLE_RATE, AScan, synthesize_ascan
from .emcore import SPEED_OF_LIGHT, ComplexPermittivity, topp_permittivity
from .ground import (DEFAULT_SOIL_LOSS_TANGENT, RcsSpectrum, SoilDescriptor,
                     ViewGeometry, coherent_rcs, effective_area)
from .retrieval import forward_rcs_values

DEFAULT_ECHO_GAIN = 10.0
PLATE_ELEVATION_M = 1.0


def hardware_gain(frequency_hz) -> np.ndarray | float:
    """Injected hardware amplitude curve (antenna/receiver response).

    A gentle even-polynomial tilt, about +2 dB across the band. Real spectral
    shadings of a real trace are necessarily even in frequency; even
    polynomial factors act as time derivatives of the pulse, so they cost no
    time-domain spreading and the fixed-length gate captures them losslessly
    (odd powers would imply an |f| cusp at DC and slow 1/t^2 tails).
    """
    f = np.asarray(frequency_hz, dtype=float) / 1e9
    out = 1.0 + 0.8 * f**2 - 0.55 * f**4
    return float(out) if np.isscalar(frequency_hz) else out


def _target_shaping(sigma_fn, range_m: float):
    """Shaping callable H(f) for an echo of RCS sigma_fn(f) at range_m."""

    def shaping(freqs: np.ndarray) -> np.ndarray:
        f = np.asarray(freqs, dtype=float)
        out = np.zeros(f.shape)
        pos = f > 0
        out[pos] = hardware_gain(f[pos]) * np.sqrt(sigma_fn(f[pos])) / range_m**2
        return out

    return shaping


def record_duration(range_m: float, center_f: float = DEFAULT_CENTER_FREQUENCY) -> float:
    """Record length leaving room for the echo and its tail."""
    return 2.0 * (range_m + 3.0) / SPEED_OF_LIGHT + 30.0 / center_f


def simulate_plate_scan(range_m: float, plate_side: float,
                        noise_rms: float = 0.0,
                        sample_rate: float = DEFAULT_SAMPLE_RATE,
                        center_f: float = DEFAULT_CENTER_FREQUENCY,
                        gain: float = DEFAULT_ECHO_GAIN,
                        rng: np.random.Generator | None = None,
                        include_ground: bool = True,
                        location: str = "plate") -> AScan:
    """Reference plate scan: plate echo at range_m, with an optional weak
    ground echo one plate elevation farther (outside the gate search).

    The plate RCS grows as f^2, so sqrt(sigma_r) is linear in f; that factor
    is synthesized as i*f (a time derivative, phase-only difference) rather
    than the real |f|, keeping the echo compact inside the gate.
    """

    def plate_shaping(freqs: np.ndarray) -> np.ndarray:
        f = np.asarray(freqs, dtype=float)
        slope = 2.0 * math.sqrt(math.pi) * plate_side**2 / SPEED_OF_LIGHT
        return hardware_gain(f) * slope * (1j * f) / range_m**2

    echoes = [(2.0 * range_m / SPEED_OF_LIGHT, gain, plate_shaping)]
    if include_ground:
        r_gnd = range_m + PLATE_ELEVATION_M
        soil = SoilDescriptor.default()
        area = effective_area(ViewGeometry(r_gnd))
        echoes.append((2.0 * r_gnd / SPEED_OF_LIGHT, 0.3 * gain,
                       _target_shaping(
                           lambda f: coherent_rcs(soil, f, 0.0, area), r_gnd)))
    return synthesize_ascan(echoes, noise_rms, sample_rate,
                            record_duration(range_m, center_f), center_f, rng,
                            altitude_est=range_m, location=location)


def simulate_scene_scan(soil: SoilDescriptor, canopy: CanopyDescriptor | None,
                        view: ViewGeometry,
                        noise_rms: float = 0.0,
                        sample_rate: float = DEFAULT_SAMPLE_RATE,
                        center_f: float = DEFAULT_CENTER_FREQUENCY,
                        gain: float = DEFAULT_ECHO_GAIN,
                        rng: np.random.Generator | None = None,
                        direct_coupling: bool = True,
                        canopy_top_echo: bool = True,
                        location: str = "scene") -> AScan:
    """A-scan over a (possibly canopied) soil scene at the view altitude.

    The ground echo is shaped by the scene RCS sigma_s(f); a direct-coupling
    pulse near t = 0 and a weak canopy-top echo are added for realism, both
    outside the gate search interval for canopies taller than 0.5 m below
    the platform.
    """
    r = view.altitude

    def sigma_scene(f):
        return forward_rcs_values(f, soil, canopy, view)

    echoes = [(2.0 * r / SPEED_OF_LIGHT, gain, _target_shaping(sigma_scene, r))]
    peak_shaping = _target_shaping(sigma_scene, r)(np.array([center_f]))[0]
    if direct_coupling:
        echoes.append((4.0 / center_f, 3.0 * gain * peak_shaping))
    if canopy_top_echo and canopy is not None and canopy.height > 0.6:
        r_top = r - canopy.height
        echoes.append((2.0 * r_top / SPEED_OF_LIGHT, 0.1 * gain * peak_shaping))
    return synthesize_ascan(echoes, noise_rms, sample_rate,
                            record_duration(r, center_f), center_f, rng,
                            altitude_est=r, location=location)


def soil_from_vwc(vwc: float, roughness_m: float = 0.01,
                  loss_tangent: float = DEFAULT_SOIL_LOSS_TANGENT,
                  scattering_beamwidth: float | None = None) -> SoilDescriptor:
    """SoilDescriptor whose permittivity matches a target moisture."""
    eps = ComplexPermittivity.from_loss_tangent(topp_permittivity(vwc), loss_tangent)
    if scattering_beamwidth is None:
        return SoilDescriptor(eps, roughness_m)
    return SoilDescriptor(eps, roughness_m, scattering_beamwidth)


def corn_canopy(eps_real: float = 28.0, height: float = 2.4,
                plants_per_m2: float = 8.0, lai: float = 4.5,
                leaf_area: float = 0.045, leaf_width: float = 0.09,
                stalk_radius: float = 0.015,
                leaf_thickness: float = DEFAULT_LEAF_THICKNESS,
                loss_tangent: float = DEFAULT_CANOPY_LOSS_TANGENT) -> CanopyDescriptor:
    """Corn-like canopy: vertical stalks plus elongated leaves."""
    eps = ComplexPermittivity.from_loss_tangent(eps_real, loss_tangent)
    leaf = DiskGeometry(leaf_width / 2.0, leaf_thickness, eps)
    stalk = CylinderGeometry(stalk_radius, height, eps)
    return CanopyDescriptor(
        height=height,
        stalk_density=plants_per_m2 / height,
        leaf_density=lai / leaf_area / height,
        leaf_geometry=leaf,
        leaf_orientation=OrientationDistribution.uniform(),
        stalk_geometry=stalk,
        crop_kind="corn",
        corn_leaf_length=leaf_area / leaf_width,
    )


def soybean_canopy(eps_real: float = 30.0, height: float = 0.9,
                   lai: float = 5.0, leaf_area: float = 0.004,
                   leaf_thickness: float = DEFAULT_LEAF_THICKNESS,
                   loss_tangent: float = DEFAULT_CANOPY_LOSS_TANGENT) -> CanopyDescriptor:
    """Soybean-like canopy: randomly oriented leaf disks, no stalks."""
    eps = ComplexPermittivity.from_loss_tangent(eps_real, loss_tangent)
    leaf = DiskGeometry(math.sqrt(leaf_area / math.pi), leaf_thickness, eps)
    return CanopyDescriptor(
        height=height,
        stalk_density=0.0,
        leaf_density=lai / leaf_area / height,
        leaf_geometry=leaf,
        leaf_orientation=OrientationDistribution.uniform(),
        crop_kind="soybean",
    )


def apply_spectrum_noise(spectrum: RcsSpectrum, sigma_db: float,
                         rng: np.random.Generator,
                         flat: bool = False) -> RcsSpectrum:
    """Multiplicative log-normal noise on an RCS spectrum.

    Per-frequency independent draws by default; flat=True applies one common
    offset across the band (platform gain/altitude style perturbation).
    """
    if flat:
        db = np.full(len(spectrum.grid), rng.normal(0.0, sigma_db))
    else:
        db = rng.normal(0.0, sigma_db, len(spectrum.grid))
    return RcsSpectrum(spectrum.grid, spectrum.values * np.power(10.0, db / 10.0))


def apply_flat_gain(spectrum: RcsSpectrum, gain_db: float) -> RcsSpectrum:
    """Deterministic flat gain offset in dB across the band."""
    return spectrum.scaled(float(10.0 ** (gain_db / 10.0)))


# ---------------------------------------------------------------------------
# Synthetic LiDAR clouds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RowCropScene:
    """Ground truth of a generated row-crop tile."""

    row_spacing: float
    plant_spacing: float
    height: float
    n_plants: int
    tile_size: float
    rows_along: str  # "x" or "y"


def _ground_points(tile_size: float, density: float, slope: tuple[float, float],
                   z0: float, noise: float, rng: np.random.Generator) -> np.ndarray:
    n = int(density * tile_size**2)
    xy = rng.uniform(0.0, tile_size, (n, 2))
    z = z0 + slope[0] * xy[:, 0] + slope[1] * xy[:, 1] + rng.normal(0.0, noise, n)
    return np.column_stack([xy, z])


def flat_ground_cloud(tile_size: float = 10.0, density: float = 50.0,
                      z0: float = 0.0, slope: tuple[float, float] = (0.0, 0.0),
                      noise: float = 0.005,
                      rng: np.random.Generator | None = None) -> np.ndarray:
    """Bare-ground cloud, optionally offset and tilted."""
    rng = rng or np.random.default_rng(0)
    return _ground_points(tile_size, density, slope, z0, noise, rng)


def row_crop_cloud(crop_kind: str = "corn", tile_size: float = 10.0,
                   row_spacing: float = 0.76, plant_spacing: float = 0.25,
                   height: float = 2.0, rows_along: str = "y",
                   ground_density: float = 400.0,
                   rng: np.random.Generator | None = None):
    """Synthetic row-crop tile. Returns (points, RowCropScene truth).

    Each row carries a continuous canopy band with tops at the nominal
    height; corn adds a dense stem point column per plant, soybean modulates
    the band top at the plant spacing. Ground returns cover the whole tile.
    """
    rng = rng or np.random.default_rng(0)
    parts = [_ground_points(tile_size, ground_density, (0.0, 0.0), 0.0, 0.004, rng)]
    margin = row_spacing / 2.0
    row_offsets = np.arange(margin, tile_size, row_spacing)
    plant_offsets = np.arange(plant_spacing / 2.0, tile_size, plant_spacing)
    half_width = 0.22 * row_spacing / 0.76  # canopy band halfwidth per row
    n_plants = row_offsets.size * plant_offsets.size
    # Base layout: rows vary across y and run along x. Each row carries a
    # dense canopy band whose top surface sits at the nominal height, so the
    # per-cell maxima of an unsmoothed CHM recover that height directly.
    for row in row_offsets:
        # Near-complete cell coverage at the CHM resolution, matching the
        # few-thousand-points/m2 density of a UAV LiDAR survey.
        n_band = int(tile_size / 0.02 * 60.0)
        s = rng.uniform(0.0, tile_size, n_band)
        if crop_kind == "corn":
            z_band = height * rng.uniform(0.98, 1.0, n_band)
        else:
            # Along-row cosine bumps peaking at plant centers; a detectable
            # few-percent top modulation that barely biases the mean height.
            bump = 0.97 - 0.03 * np.cos(2.0 * np.pi * s / plant_spacing)
            z_band = height * bump * rng.uniform(0.998, 1.0, n_band)
        band = np.column_stack([s, rng.uniform(row - half_width, row + half_width,
                                               n_band), z_band])
        parts.append(band)
        if crop_kind == "corn":
            for along in plant_offsets:
                n_stem = 150
                stem = np.column_stack([
                    rng.normal(along, 0.02, n_stem),
                    rng.normal(row, 0.02, n_stem),
                    rng.uniform(0.05, height, n_stem),
                ])
                parts.append(stem)
    points = np.vstack(parts)
    keep = (points[:, 0] >= 0) & (points[:, 0] < tile_size) \
        & (points[:, 1] >= 0) & (points[:, 1] < tile_size)
    points = points[keep]
    if rows_along == "y":
        points = points[:, [1, 0, 2]]
    truth = RowCropScene(row_spacing, plant_spacing, height, int(n_plants),
                         tile_size, rows_along)
    return points, truth


def raycast_disk_canopy(lai: float = 3.0, tile_size: float = 5.0,
                        height: float = 1.5, leaf_radius: float = 0.06,
                        rays_per_m2: float = 400.0,
                        rng: np.random.Generator | None = None) -> np.ndarray:
    """Ray-cast cloud through a random disk canopy of known LAI.

    Disks are uniformly positioned with normals uniform on the upper
    hemisphere (leaf projection coefficient 0.5); vertical rays record their
    first interception, or a ground return at z = 0. Single-return semantics.
    """
    rng = rng or np.random.default_rng(0)
    leaf_area = math.pi * leaf_radius**2
    n_disks = int(round(lai * tile_size**2 / leaf_area))
    pad = leaf_radius
    centers = np.column_stack([
        rng.uniform(-pad, tile_size + pad, n_disks),
        rng.uniform(-pad, tile_size + pad, n_disks),
        rng.uniform(0.15 * height, height, n_disks),
    ])
    # Uniform solid angle on the hemisphere: cos(theta) uniform in (0, 1],
    # clipped away from horizontal for stable plane intersections; the
    # effective projection coefficient stays within a few percent of 0.5.
    cos_t = rng.uniform(0.05, 1.0, n_disks)
    sin_t = np.sqrt(1.0 - cos_t**2)
    phi = rng.uniform(0.0, 2.0 * np.pi, n_disks)
    normals = np.column_stack([sin_t * np.cos(phi), sin_t * np.sin(phi), cos_t])

    n_rays = int(rays_per_m2 * tile_size**2)
    ray_xy = rng.uniform(0.0, tile_size, (n_rays, 2))
    hits = np.zeros(n_rays)
    chunk = 2000
    for lo in range(0, n_rays, chunk):
        xy = ray_xy[lo:lo + chunk]
        dx = xy[:, 0:1] - centers[None, :, 0]
        dy = xy[:, 1:2] - centers[None, :, 1]
        # Intersection height of the vertical ray with each disk plane.
        z_star = centers[None, :, 2] - (normals[None, :, 0] * dx
                                        + normals[None, :, 1] * dy) / normals[None, :, 2]
        dz = z_star - centers[None, :, 2]
        inside = (dx**2 + dy**2 + dz**2 <= leaf_radius**2) & (z_star > 0.0)
        z_hit = np.where(inside, z_star, 0.0)
        hits[lo:lo + chunk] = z_hit.max(axis=1)
    return np.column_stack([ray_xy, hits])

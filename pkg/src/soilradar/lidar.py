"""Canopy structure extraction from LiDAR point clouds.

Pipeline per 10 m x 10 m tile: normalize the cloud to the local ground plane,
rasterize a canopy height model (CHM) at 2 cm resolution with Gaussian
smoothing, detect the crop-row direction from profile periodicity, then
estimate per-row plant density (stem-column peaks for corn, kernel-smoothed
height peaks for soybean), mean canopy height over vegetated cells, and leaf
area index by layered gap-fraction inversion.

LAI uses eight vertical layers; with P_gap(z) the probability that a pulse
penetrates below height z, the layered form accumulates the per-layer drop of
ln P_gap from the canopy top downward, scaled by the leaf projection
coefficient G (~0.5 for randomly oriented leaves). Two variants are provided:
"layered" divides each increment by the layer thickness, the default
"integrated" telescopes to -ln(ground fraction)/G, which carries the
dimensions of an area index. Return counts above/below the layer boundaries
proxy pulse transmission, which is exact for single-return clouds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.signal import find_peaks

from .errors import PointCloudError, RowDetectionError, ValidityError

CHM_RESOLUTION_M = 0.02
CHM_SMOOTHING_SIGMA_PX = 3.0
TILE_SIZE_M = 10.0

GROUND_CELL_M = 1.0
GROUND_PERCENTILE = 5.0
MIN_TILE_POINTS = 100

ROW_SCORE_THRESHOLD = 0.3
MIN_ROW_SPACING_M = 0.3

CORN_MIN_PLANT_SEPARATION_M = 0.15
SOYBEAN_KERNEL_ALONG_M = 0.1

LAI_LAYERS = 8
LEAF_PROJECTION_COEFF = 0.5
GROUND_HEIGHT_THRESHOLD_M = 0.1


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Point cloud in meters, one row per (x, y, z) return."""

    points: np.ndarray
    intensity: np.ndarray | None = None
    tile_id: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError("points must be an (n, 3) array")
        if pts.shape[0] == 0:
            raise PointCloudError("point cloud is empty")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")

    def __len__(self) -> int:
        return int(self.points.shape[0])


@dataclass(frozen=True, eq=False)
class CanopyHeightModel:
    """Max-height raster; values indexed [ix, iy] with 2 cm cells."""

    values: np.ndarray
    origin: tuple[float, float]
    resolution: float = CHM_RESOLUTION_M
    smoothed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if np.any(self.values < 0):
            raise ValueError("CHM values must be >= 0 after ground normalization")

    def axis_coordinates(self, axis: int) -> np.ndarray:
        n = self.values.shape[axis]
        return self.origin[axis] + (np.arange(n) + 0.5) * self.resolution


@dataclass(frozen=True, eq=False)
class RowSegmentation:
    """Detected crop-row layout.

    row_axis names the axis rows RUN ALONG; centerlines and boundaries are
    offsets (m) along the perpendicular axis.
    """

    row_axis: str
    score: float
    centerlines: np.ndarray
    boundaries: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "centerlines", np.asarray(self.centerlines, float))
        object.__setattr__(self, "boundaries", np.asarray(self.boundaries, float))
        if self.row_axis not in ("x", "y"):
            raise ValueError("row axis must be 'x' or 'y'")
        if np.any(np.diff(self.centerlines) <= 0):
            raise ValueError("centerlines must be sorted")
        if not 0 < self.score <= 1:
            raise ValueError("periodicity score must lie in (0, 1]")

    @property
    def mean_spacing(self) -> float:
        return float(np.mean(np.diff(self.centerlines)))


@dataclass(frozen=True)
class PlantDensityResult:
    """Plants per m^2 and the detected stem positions (along, cross) in m."""

    density: float
    positions: tuple


@dataclass(frozen=True)
class CanopyStructureEstimate:
    """Canopy parameters consumable as a forward-model descriptor skeleton."""

    mean_height: float
    plant_density: float  # plants/m^2
    lai: float
    leaf_density: float  # leaves/m^3
    crop_kind: str = "soybean"
    row_spacing: float = 0.0
    row_axis: str = "y"
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("mean_height", "plant_density", "lai", "leaf_density"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


def normalize_ground(cloud: PointCloud) -> PointCloud:
    """Map the local ground surface to z = 0.

    Ground candidates are the lowest 5th-percentile points of each 1 m cell;
    a plane is least-squares fitted through them and subtracted, which
    tolerates moderate terrain slope and canopy occlusion.
    """
    if len(cloud) < MIN_TILE_POINTS:
        raise PointCloudError(f"tile has {len(cloud)} points, need >= {MIN_TILE_POINTS}")
    pts = cloud.points
    ix = np.floor(pts[:, 0] / GROUND_CELL_M).astype(int)
    iy = np.floor(pts[:, 1] / GROUND_CELL_M).astype(int)
    cell_key = (ix - ix.min()) * (iy.max() - iy.min() + 1) + (iy - iy.min())
    ground_idx = []
    for key in np.unique(cell_key):
        members = np.nonzero(cell_key == key)[0]
        cutoff = np.percentile(pts[members, 2], GROUND_PERCENTILE)
        ground_idx.append(members[pts[members, 2] <= cutoff])
    ground = pts[np.concatenate(ground_idx)]
    a = np.column_stack([ground[:, 0], ground[:, 1], np.ones(ground.shape[0])])
    coef, *_ = np.linalg.lstsq(a, ground[:, 2], rcond=None)
    plane = pts[:, 0] * coef[0] + pts[:, 1] * coef[1] + coef[2]
    out = pts.copy()
    out[:, 2] = pts[:, 2] - plane
    return PointCloud(out, cloud.intensity, cloud.tile_id)


def build_chm(cloud: PointCloud, tile_size: float = TILE_SIZE_M,
              resolution: float = CHM_RESOLUTION_M,
              smooth: bool = True) -> CanopyHeightModel:
    """Rasterize per-cell maximum height, fill gaps, and smooth.

    Empty cells take the value of their nearest populated neighbor; Gaussian
    smoothing uses sigma = 3 pixels. Input must be ground-normalized.
    """
    pts = cloud.points
    if pts.shape[0] == 0:
        raise PointCloudError("empty tile")
    x0 = float(np.floor(pts[:, 0].min() / resolution) * resolution)
    y0 = float(np.floor(pts[:, 1].min() / resolution) * resolution)
    nx = max(1, int(math.ceil((pts[:, 0].max() - x0) / resolution)))
    ny = max(1, int(math.ceil((pts[:, 1].max() - y0) / resolution)))
    nx = min(nx, int(round(tile_size / resolution)))
    ny = min(ny, int(round(tile_size / resolution)))
    ix = np.clip(((pts[:, 0] - x0) / resolution).astype(int), 0, nx - 1)
    iy = np.clip(((pts[:, 1] - y0) / resolution).astype(int), 0, ny - 1)
    raster = np.full((nx, ny), -1.0)
    np.maximum.at(raster, (ix, iy), np.clip(pts[:, 2], 0.0, None))
    empty = raster < 0
    if np.all(empty):
        raise PointCloudError("no populated CHM cells")
    if np.any(empty):
        _, (near_x, near_y) = ndimage.distance_transform_edt(
            empty, return_indices=True)
        raster = raster[near_x, near_y]
    if smooth:
        raster = ndimage.gaussian_filter(raster, CHM_SMOOTHING_SIGMA_PX)
    return CanopyHeightModel(np.clip(raster, 0.0, None), (x0, y0), resolution,
                             smoothed=smooth)


def _profile_peaks(profile: np.ndarray, resolution: float, min_spacing: float):
    distance = max(1, int(round(min_spacing / resolution)))
    prominence = 0.05 * (float(profile.max()) - float(profile.min()) + 1e-12)
    peaks, _ = find_peaks(profile, distance=distance, prominence=prominence)
    return peaks


def _periodicity_score(peaks: np.ndarray) -> float:
    if peaks.size < 3:
        return 0.0
    gaps = np.diff(peaks).astype(float)
    mean = gaps.mean()
    if mean == 0:
        return 0.0
    cv = gaps.std() / mean
    return 1.0 / (1.0 + cv)


def detect_rows(chm: CanopyHeightModel) -> RowSegmentation:
    """Infer the row direction from CHM profile periodicity.

    The CHM is averaged along each axis; the axis whose profile has the
    stronger peak-spacing regularity (score 1/(1+CV)) is the periodic one and
    rows run along the other. Centerlines sit at the profile peaks,
    boundaries at the minima between neighboring peaks. Raises when the best
    score falls below 0.3 (no row structure).
    """
    profiles = {
        "x": chm.values.mean(axis=1),  # periodic across x => rows along y
        "y": chm.values.mean(axis=0),
    }
    best = None
    for periodic_axis, profile in profiles.items():
        peaks = _profile_peaks(profile, chm.resolution, MIN_ROW_SPACING_M)
        score = _periodicity_score(peaks)
        if best is None or score > best[1]:
            best = (periodic_axis, score, peaks, profile)
    periodic_axis, score, peaks, profile = best
    if score < ROW_SCORE_THRESHOLD:
        raise RowDetectionError(f"row periodicity score {score:.3f} < "
                                f"{ROW_SCORE_THRESHOLD}")
    axis_index = 0 if periodic_axis == "x" else 1
    coords = chm.axis_coordinates(axis_index)
    centerlines = coords[peaks]
    boundaries = []
    for left, right in zip(peaks[:-1], peaks[1:]):
        trough = left + int(np.argmin(profile[left:right + 1]))
        boundaries.append(coords[trough])
    row_axis = "y" if periodic_axis == "x" else "x"
    return RowSegmentation(row_axis, score, centerlines, np.asarray(boundaries))


def _strip_intervals(rows: RowSegmentation, lo: float, hi: float):
    """Per-centerline (start, stop) cross-row intervals from the boundaries."""
    edges = np.concatenate([[lo], rows.boundaries, [hi]])
    return [(edges[i], edges[i + 1]) for i in range(rows.centerlines.size)]


def plant_density_corn(cloud: PointCloud, rows: RowSegmentation,
                       bin_m: float = 0.02,
                       min_separation: float = CORN_MIN_PLANT_SEPARATION_M) -> PlantDensityResult:
    """Detect corn plants as peaks of the height-weighted point density.

    Stems concentrate returns at all heights, so summing z per along-row bin
    inside each row strip produces a peak per plant even under a merged upper
    canopy. Peaks closer than 0.15 m merge into one plant.
    """
    pts = cloud.points
    along = pts[:, 0] if rows.row_axis == "x" else pts[:, 1]
    cross = pts[:, 1] if rows.row_axis == "x" else pts[:, 0]
    lo, hi = float(cross.min()), float(cross.max())
    area = (pts[:, 0].max() - pts[:, 0].min()) * (pts[:, 1].max() - pts[:, 1].min())
    a_min, a_max = float(along.min()), float(along.max())
    n_bins = max(2, int(math.ceil((a_max - a_min) / bin_m)))
    positions = []
    for (c_lo, c_hi), center in zip(_strip_intervals(rows, lo, hi),
                                    rows.centerlines):
        mask = (cross >= c_lo) & (cross < c_hi) & (pts[:, 2] > GROUND_HEIGHT_THRESHOLD_M)
        if not np.any(mask):
            continue
        profile, edges = np.histogram(along[mask], bins=n_bins,
                                      range=(a_min, a_max), weights=pts[mask, 2])
        profile = ndimage.gaussian_filter1d(profile, 2.0)
        distance = max(1, int(round(min_separation / bin_m)))
        # The merged upper canopy contributes a slowly varying background;
        # stems stand out against it after detrending.
        trend = ndimage.uniform_filter1d(profile, 4 * distance)
        residual = profile - trend
        spread = float(np.std(residual))
        if spread == 0.0:
            continue
        peaks, _ = find_peaks(residual, distance=distance, prominence=0.8 * spread)
        centers = 0.5 * (edges[peaks] + edges[peaks + 1])
        positions.extend((float(c), float(center)) for c in centers)
    density = len(positions) / float(area) if area > 0 else 0.0
    return PlantDensityResult(density, tuple(positions))


def plant_density_soybean(chm: CanopyHeightModel, rows: RowSegmentation,
                          kernel_along_m: float = SOYBEAN_KERNEL_ALONG_M) -> PlantDensityResult:
    """Detect soybean plants from kernel-aggregated CHM height along each row.

    A rectangular kernel (0.1 m along-row by the row width by full height)
    slides along each strip of the smoothed CHM; profile peaks are plant
    centers and midpoints between adjacent centers partition the row.
    """
    values = chm.values
    cross_axis = 0 if rows.row_axis == "y" else 1
    along_axis = 1 - cross_axis
    coords_cross = chm.axis_coordinates(cross_axis)
    coords_along = chm.axis_coordinates(along_axis)
    extent = (values.shape[0] * chm.resolution) * (values.shape[1] * chm.resolution)
    kernel_px = max(1, int(round(kernel_along_m / chm.resolution)))
    positions = []
    lo = float(coords_cross.min())
    hi = float(coords_cross.max())
    for (c_lo, c_hi), center in zip(_strip_intervals(rows, lo, hi),
                                    rows.centerlines):
        strip_mask = (coords_cross >= c_lo) & (coords_cross < c_hi)
        if not np.any(strip_mask):
            continue
        strip = values[strip_mask, :] if cross_axis == 0 else values[:, strip_mask].T
        profile = ndimage.uniform_filter1d(strip.mean(axis=0), kernel_px)
        # Detrend at a fixed half-meter scale so tile-edge droop and slow
        # canopy undulation do not swamp the per-plant bumps regardless of
        # the chosen kernel width.
        trend_px = max(int(round(0.3 / chm.resolution)), 2 * kernel_px + 1)
        trend = ndimage.uniform_filter1d(profile, trend_px)
        residual = profile - trend
        spread = float(np.std(residual))
        if spread == 0.0:
            continue
        peaks, _ = find_peaks(residual, distance=kernel_px, prominence=0.8 * spread)
        positions.extend((float(coords_along[p]), float(center)) for p in peaks)
    density = len(positions) / extent if extent > 0 else 0.0
    return PlantDensityResult(density, tuple(positions))


def canopy_height(chm: CanopyHeightModel,
                  rows: RowSegmentation | None = None) -> float:
    """Mean CHM height over vegetated cells.

    Vegetated cells exceed 25% of the tile's 95th-percentile height, which
    excludes bare inter-row ground from the average. Feed the unsmoothed
    raster here: Gaussian smoothing bleeds canopy edges into the ground and
    dilutes plant tops, biasing the mean low.
    """
    values = chm.values
    reference = float(np.percentile(values, 95.0))
    mask = values > 0.25 * reference
    if not np.any(mask):
        return 0.0
    return float(values[mask].mean())


def estimate_lai(cloud: PointCloud, layers: int = LAI_LAYERS,
                 projection_coeff: float = LEAF_PROJECTION_COEFF,
                 form: str = "integrated",
                 ground_threshold: float = GROUND_HEIGHT_THRESHOLD_M) -> float:
    """Leaf area index from layered gap-fraction inversion.

    Returns within ground_threshold of z = 0 count as ground. With no
    vegetation returns the LAI is 0; with no ground returns the gap fraction
    vanishes and the inversion is degenerate (raises).

    form = "integrated" (default): LAI = -ln(P_ground) / G, the telescoped
    sum of layer increments times the layer thickness.
    form = "layered": per-layer increments divided by the layer thickness.
    """
    if form not in ("integrated", "layered"):
        raise ValueError(f"unknown LAI form {form!r}")
    z = np.clip(cloud.points[:, 2], 0.0, None)
    z = np.where(z < ground_threshold, 0.0, z)
    z_top = float(z.max())
    if z_top <= 0.0:
        return 0.0
    n_total = z.size
    p_ground = float(np.count_nonzero(z == 0.0)) / n_total
    if p_ground == 0.0:
        raise ValidityError("no ground returns: canopy fully occludes the tile")
    boundaries = np.linspace(0.0, z_top, layers + 1)
    v_z = z_top / layers
    p_gap = np.array([np.count_nonzero(z <= b + 1e-12) / n_total
                      for b in boundaries])
    # ln P_gap drop per layer walking down from the canopy top; the gap
    # probability decreases with depth, so each drop is >= 0 and their sum
    # telescopes to -ln(ground fraction).
    drops = np.log(p_gap[1:]) - np.log(p_gap[:-1])
    if form == "layered":
        return float(np.sum(drops / v_z) / projection_coeff)
    return float(np.sum(drops) / projection_coeff)


def leaf_density(lai: float, leaf_area: float, height: float) -> float:
    """Volumetric leaf count: (LAI / A_leaf) leaves per m^2, divided by height.

    The per-area count LAI/A_leaf is the primary relation; division by the
    canopy height converts it to the per-volume density the forward model
    consumes.
    """
    if not leaf_area > 0:
        raise ValueError("leaf area must be positive")
    if lai < 0:
        raise ValueError("LAI must be >= 0")
    if lai == 0.0:
        return 0.0
    if not height > 0:
        raise ValueError("canopy height must be positive for a volumetric density")
    return lai / leaf_area / height


def extract_structure(cloud: PointCloud, crop_kind: str,
                      leaf_area: float,
                      tile_size: float = TILE_SIZE_M) -> CanopyStructureEstimate:
    """Run the full tile pipeline and bundle the descriptor-ready estimate."""
    normalized = normalize_ground(cloud)
    chm_raw = build_chm(normalized, tile_size, smooth=False)
    chm = build_chm(normalized, tile_size, smooth=True)
    rows = detect_rows(chm)
    if crop_kind == "corn":
        plants = plant_density_corn(normalized, rows)
    else:
        plants = plant_density_soybean(chm, rows)
    height = canopy_height(chm_raw, rows)
    lai = estimate_lai(normalized)
    density = leaf_density(lai, leaf_area, height) if height > 0 else 0.0
    return CanopyStructureEstimate(
        mean_height=height,
        plant_density=plants.density,
        lai=lai,
        leaf_density=density,
        crop_kind=crop_kind,
        row_spacing=rows.mean_spacing,
        row_axis=rows.row_axis,
        diagnostics={"row_score": rows.score,
                     "n_rows": int(rows.centerlines.size),
                     "n_plants": len(plants.positions)},
    )

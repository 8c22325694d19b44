"""Text file formats exchanged by the CLI and the modules.

All formats are plain delimited text so they diff and version cleanly:

A-scan            `# sample_rate_hz=`, `# altitude_m=`, `# location=` header
                  comments, then one amplitude per line.
RCS spectrum      optional `# key=value` comments, a `frequency_hz,rcs_m2`
                  header line, then one `f,sigma` row per grid point.
Calibration       provenance `# key=value` comments, a
                  `frequency_hz,c_value` header, rows.
Canopy descriptor key = value lines; nested fields use dotted names
                  (e.g. `leaf_geometry.radius`).
Point cloud       one `x y z` triple per line, meters.
Allometry table   csv: crop,leaf_area_m2,leaf_width_m,stalk_radius_m
                  [,leaf_thickness_m].
Writes are atomic (temp file then rename).
"""

from __future__ import annotations

import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .canopy import (DEFAULT_LEAF_THICKNESS, CanopyDescriptor, CylinderGeometry,
                     DiskGeometry, OrientationDistribution)
from .dsp import AScan, CalibrationFactor
from .emcore import ComplexPermittivity, FrequencyGrid
from .errors import FileFormatError, InputError
from .ground import RcsSpectrum
from .lidar import CanopyStructureEstimate, PointCloud
from .retrieval import RetrievalResult, SearchConfig


def _fmt(value) -> str:
    """repr of a value as a plain Python float (full precision, parseable)."""
    return repr(float(value))


def atomic_write(path, text: str) -> None:
    """Write text to path via a temp file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _require_exists(path) -> Path:
    path = Path(path)
    if not path.exists():
        raise InputError(f"no such file: {path}")
    return path


# ---------------------------------------------------------------------------
# key = value format
# ---------------------------------------------------------------------------

def parse_keyvalue(path) -> dict:
    """Parse `key = value` lines; `#` comments and blank lines are skipped."""
    path = _require_exists(path)
    out = {}
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FileFormatError(path, line_no, f"expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def format_keyvalue(pairs: dict, title: str = "") -> str:
    lines = [f"# {title}"] if title else []
    lines.extend(f"{key} = {value}" for key, value in pairs.items())
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# A-scans
# ---------------------------------------------------------------------------

def write_ascan(path, scan: AScan) -> None:
    lines = [f"# sample_rate_hz={_fmt(scan.sample_rate)}"]
    if scan.altitude_est is not None:
        lines.append(f"# altitude_m={_fmt(scan.altitude_est)}")
    if scan.location:
        lines.append(f"# location={scan.location}")
    lines.extend(_fmt(v) for v in scan.samples)
    atomic_write(path, "\n".join(lines) + "\n")


def read_ascan(path) -> AScan:
    path = _require_exists(path)
    sample_rate = None
    altitude = None
    location = ""
    samples = []
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" not in body:
                raise FileFormatError(path, line_no, f"bad header comment {raw!r}")
            key, _, value = body.partition("=")
            key = key.strip()
            try:
                if key == "sample_rate_hz":
                    sample_rate = float(value)
                elif key == "altitude_m":
                    altitude = float(value)
                elif key == "location":
                    location = value.strip()
            except ValueError as exc:
                raise FileFormatError(path, line_no, f"bad header value: {exc}") from exc
            continue
        try:
            samples.append(float(line))
        except ValueError as exc:
            raise FileFormatError(path, line_no, f"bad amplitude {line!r}") from exc
    if sample_rate is None:
        raise FileFormatError(path, 1, "missing '# sample_rate_hz=' header")
    if not samples:
        raise FileFormatError(path, 1, "no amplitude samples")
    return AScan(np.asarray(samples), sample_rate, altitude, location)


# ---------------------------------------------------------------------------
# RCS spectra
# ---------------------------------------------------------------------------

def write_rcs_spectrum(path, spectrum: RcsSpectrum, metadata: dict | None = None) -> None:
    lines = [f"# {key}={value}" for key, value in (metadata or {}).items()]
    lines.append("frequency_hz,rcs_m2")
    lines.extend(f"{_fmt(f)},{_fmt(v)}" for f, v in
                 zip(spectrum.grid.frequencies, spectrum.values))
    atomic_write(path, "\n".join(lines) + "\n")


def read_rcs_spectrum(path):
    """Returns (RcsSpectrum, metadata dict)."""
    path = _require_exists(path)
    meta = {}
    freqs = []
    values = []
    header_seen = False
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                meta[key.strip()] = value.strip()
            continue
        if not header_seen:
            if line != "frequency_hz,rcs_m2":
                raise FileFormatError(path, line_no,
                                      f"expected header 'frequency_hz,rcs_m2', got {raw!r}")
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise FileFormatError(path, line_no, f"expected two columns, got {raw!r}")
        try:
            freqs.append(float(parts[0]))
            values.append(float(parts[1]))
        except ValueError as exc:
            raise FileFormatError(path, line_no, f"bad number: {exc}") from exc
    if not header_seen or not freqs:
        raise FileFormatError(path, 1, "missing spectrum header or rows")
    freqs = np.asarray(freqs)
    grid = FrequencyGrid(freqs, float(freqs[0]), float(freqs[-1]))
    return RcsSpectrum(grid, np.asarray(values)), meta


# ---------------------------------------------------------------------------
# Calibration files
# ---------------------------------------------------------------------------

def write_calibration(path, cal: CalibrationFactor) -> None:
    ranges = " ".join(_fmt(r) for r in cal.reference_ranges)
    lines = [
        f"# plate_side_m={_fmt(cal.plate_side)}",
        f"# reference_ranges_m={ranges}",
        f"# scan_count={cal.scan_count}",
        f"# valid_band_hz={_fmt(cal.valid_low_hz)} {_fmt(cal.valid_high_hz)}",
        "frequency_hz,c_value",
    ]
    lines.extend(f"{_fmt(f)},{_fmt(v)}" for f, v in zip(cal.grid.frequencies, cal.values))
    atomic_write(path, "\n".join(lines) + "\n")


def read_calibration(path) -> CalibrationFactor:
    path = _require_exists(path)
    meta = {}
    freqs = []
    values = []
    header_seen = False
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            key, _, value = body.partition("=")
            meta[key.strip()] = value.strip()
            continue
        if not header_seen:
            if line != "frequency_hz,c_value":
                raise FileFormatError(path, line_no,
                                      f"expected header 'frequency_hz,c_value', got {raw!r}")
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise FileFormatError(path, line_no, f"expected two columns, got {raw!r}")
        try:
            freqs.append(float(parts[0]))
            values.append(float(parts[1]))
        except ValueError as exc:
            raise FileFormatError(path, line_no, f"bad number: {exc}") from exc
    try:
        side = float(meta["plate_side_m"])
        ranges = tuple(float(tok) for tok in meta["reference_ranges_m"].split())
        count = int(meta["scan_count"])
        lo, hi = (float(tok) for tok in meta["valid_band_hz"].split())
    except (KeyError, ValueError) as exc:
        raise FileFormatError(path, 1, f"missing or bad provenance header: {exc}") from exc
    if not freqs:
        raise FileFormatError(path, 1, "no calibration rows")
    freqs = np.asarray(freqs)
    grid = FrequencyGrid(freqs, float(freqs[0]), float(freqs[-1]))
    return CalibrationFactor(grid, np.asarray(values), side, ranges, count, lo, hi)


# ---------------------------------------------------------------------------
# Canopy descriptors
# ---------------------------------------------------------------------------

def canopy_to_pairs(canopy: CanopyDescriptor) -> dict:
    pairs = {
        "crop_kind": canopy.crop_kind,
        "height": repr(canopy.height),
        "stalk_density": repr(canopy.stalk_density),
        "leaf_density": repr(canopy.leaf_density),
        "leaf_geometry.radius": repr(canopy.leaf_geometry.radius),
        "leaf_geometry.thickness": repr(canopy.leaf_geometry.thickness),
        "leaf_geometry.permittivity.real_part":
            repr(canopy.leaf_geometry.permittivity.real_part),
        "leaf_geometry.permittivity.imag_part":
            repr(canopy.leaf_geometry.permittivity.imag_part),
        "leaf_orientation.kind": canopy.leaf_orientation.kind,
    }
    if canopy.leaf_orientation.kind == "tabulated":
        dens = canopy.leaf_orientation.density
        pairs["leaf_orientation.psi_count"] = str(dens.shape[0])
        pairs["leaf_orientation.delta_count"] = str(dens.shape[1])
        pairs["leaf_orientation.density"] = " ".join(_fmt(v) for v in dens.ravel())
    if canopy.corn_leaf_length is not None:
        pairs["corn_leaf_length"] = repr(canopy.corn_leaf_length)
    if canopy.stalk_geometry is not None:
        pairs.update({
            "stalk_geometry.radius": repr(canopy.stalk_geometry.radius),
            "stalk_geometry.length": repr(canopy.stalk_geometry.length),
            "stalk_geometry.permittivity.real_part":
                repr(canopy.stalk_geometry.permittivity.real_part),
            "stalk_geometry.permittivity.imag_part":
                repr(canopy.stalk_geometry.permittivity.imag_part),
        })
    return pairs


def write_canopy(path, canopy: CanopyDescriptor) -> None:
    atomic_write(path, format_keyvalue(canopy_to_pairs(canopy), "canopy descriptor"))


def read_canopy(path) -> CanopyDescriptor:
    pairs = parse_keyvalue(path)
    try:
        leaf_eps = ComplexPermittivity(
            float(pairs["leaf_geometry.permittivity.real_part"]),
            float(pairs["leaf_geometry.permittivity.imag_part"]))
        leaf = DiskGeometry(float(pairs["leaf_geometry.radius"]),
                            float(pairs["leaf_geometry.thickness"]), leaf_eps)
        kind = pairs.get("leaf_orientation.kind", "uniform")
        if kind == "tabulated":
            shape = (int(pairs["leaf_orientation.psi_count"]),
                     int(pairs["leaf_orientation.delta_count"]))
            dens = np.asarray([float(tok) for tok in
                               pairs["leaf_orientation.density"].split()])
            orientation = OrientationDistribution.tabulated(dens.reshape(shape))
        else:
            orientation = OrientationDistribution(kind)
        stalk = None
        if "stalk_geometry.radius" in pairs:
            stalk_eps = ComplexPermittivity(
                float(pairs["stalk_geometry.permittivity.real_part"]),
                float(pairs["stalk_geometry.permittivity.imag_part"]))
            stalk = CylinderGeometry(float(pairs["stalk_geometry.radius"]),
                                     float(pairs["stalk_geometry.length"]), stalk_eps)
        length = pairs.get("corn_leaf_length")
        return CanopyDescriptor(
            height=float(pairs["height"]),
            stalk_density=float(pairs["stalk_density"]),
            leaf_density=float(pairs["leaf_density"]),
            leaf_geometry=leaf,
            leaf_orientation=orientation,
            stalk_geometry=stalk,
            crop_kind=pairs.get("crop_kind", "soybean"),
            corn_leaf_length=float(length) if length is not None else None,
        )
    except KeyError as exc:
        raise FileFormatError(path, 1, f"missing canopy field {exc}") from exc
    except ValueError as exc:
        raise FileFormatError(path, 1, f"bad canopy value: {exc}") from exc


# ---------------------------------------------------------------------------
# Point clouds and allometry
# ---------------------------------------------------------------------------

def write_point_cloud(path, cloud: PointCloud) -> None:
    lines = [f"{_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}" for p in cloud.points]
    atomic_write(path, "\n".join(lines) + "\n")


def read_point_cloud(path, tile_id: str = "") -> PointCloud:
    path = _require_exists(path)
    rows = []
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise FileFormatError(path, line_no, f"expected 'x y z', got {raw!r}")
        try:
            rows.append([float(parts[0]), float(parts[1]), float(parts[2])])
        except ValueError as exc:
            raise FileFormatError(path, line_no, f"bad coordinate: {exc}") from exc
    if not rows:
        raise FileFormatError(path, 1, "empty point cloud")
    return PointCloud(np.asarray(rows), tile_id=tile_id or Path(path).stem)


def read_allometry(path) -> dict:
    """crop -> dict(leaf_area, leaf_width, stalk_radius, leaf_thickness)."""
    path = _require_exists(path)
    table = {}
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("crop"):
            continue
        parts = [tok.strip() for tok in line.split(",")]
        if len(parts) not in (4, 5):
            raise FileFormatError(path, line_no,
                                  "expected crop,leaf_area_m2,leaf_width_m,"
                                  "stalk_radius_m[,leaf_thickness_m]")
        try:
            table[parts[0]] = {
                "leaf_area": float(parts[1]),
                "leaf_width": float(parts[2]),
                "stalk_radius": float(parts[3]),
                "leaf_thickness": float(parts[4]) if len(parts) == 5
                else DEFAULT_LEAF_THICKNESS,
            }
        except ValueError as exc:
            raise FileFormatError(path, line_no, f"bad number: {exc}") from exc
    if not table:
        raise FileFormatError(path, 1, "no allometry rows")
    return table


def structure_to_descriptor(estimate: CanopyStructureEstimate, allometry: dict,
                            permittivity: ComplexPermittivity) -> CanopyDescriptor:
    """Fill a descriptor skeleton from a structure estimate plus allometry.

    Leaf geometry keeps total one-sided leaf area consistent with the LAI:
    soybean disks carry the full mean leaf area, corn leaves split into
    width-sized disks whose concatenated length preserves that area.
    """
    entry = allometry[estimate.crop_kind]
    thickness = entry.get("leaf_thickness", DEFAULT_LEAF_THICKNESS)
    if estimate.crop_kind == "corn":
        radius = entry["leaf_width"] / 2.0
        leaf = DiskGeometry(radius, thickness, permittivity)
        stalk = CylinderGeometry(entry["stalk_radius"],
                                 max(estimate.mean_height, 1e-3), permittivity)
        return CanopyDescriptor(
            height=estimate.mean_height,
            stalk_density=estimate.plant_density / max(estimate.mean_height, 1e-3),
            leaf_density=estimate.leaf_density,
            leaf_geometry=leaf,
            leaf_orientation=OrientationDistribution.uniform(),
            stalk_geometry=stalk,
            crop_kind="corn",
            corn_leaf_length=entry["leaf_area"] / entry["leaf_width"],
        )
    leaf = DiskGeometry(math.sqrt(entry["leaf_area"] / math.pi), thickness,
                        permittivity)
    return CanopyDescriptor(
        height=estimate.mean_height,
        stalk_density=0.0,
        leaf_density=estimate.leaf_density,
        leaf_geometry=leaf,
        leaf_orientation=OrientationDistribution.uniform(),
        crop_kind="soybean",
    )


def write_structure(path, estimate: CanopyStructureEstimate) -> None:
    pairs = {
        "crop_kind": estimate.crop_kind,
        "mean_height": repr(estimate.mean_height),
        "plant_density": repr(estimate.plant_density),
        "lai": repr(estimate.lai),
        "leaf_density": repr(estimate.leaf_density),
        "row_spacing": repr(estimate.row_spacing),
        "row_axis": estimate.row_axis,
    }
    for key, value in estimate.diagnostics.items():
        pairs[f"diagnostics.{key}"] = repr(value)
    atomic_write(path, format_keyvalue(pairs, "canopy structure estimate"))


# ---------------------------------------------------------------------------
# Retrieval reports and sweep tables
# ---------------------------------------------------------------------------

def write_retrieval_report(path, result: RetrievalResult, cfg: SearchConfig,
                           metadata: dict | None = None) -> None:
    pairs = dict(metadata or {})
    pairs.update({
        "soil_permittivity_real": repr(result.soil_permittivity.real_part),
        "soil_permittivity_imag": repr(result.soil_permittivity.imag_part),
        "canopy_permittivity_real": repr(result.canopy_permittivity.real_part),
        "canopy_permittivity_imag": repr(result.canopy_permittivity.imag_part),
        "vwc": repr(result.vwc.vwc),
        "residual_m4": repr(result.residual),
        "soil_index": str(result.soil_index),
        "canopy_index": str(result.canopy_index),
        "soil_boundary_hit": str(result.soil_boundary_hit).lower(),
        "canopy_boundary_hit": str(result.canopy_boundary_hit).lower(),
        "config.soil_eps_min": repr(float(cfg.soil_eps[0])),
        "config.soil_eps_max": repr(float(cfg.soil_eps[-1])),
        "config.soil_eps_points": str(cfg.soil_eps.size),
        "config.canopy_eps_min": repr(float(cfg.canopy_eps[0])),
        "config.canopy_eps_max": repr(float(cfg.canopy_eps[-1])),
        "config.canopy_eps_points": str(cfg.canopy_eps.size),
        "config.soil_loss_tangent": repr(cfg.soil_loss_tangent),
        "config.canopy_loss_tangent": repr(cfg.canopy_loss_tangent),
        "config.canopy_modeling_enabled": str(cfg.canopy_modeling_enabled).lower(),
    })
    if cfg.sub_band is not None:
        pairs["config.sub_band_hz"] = f"{cfg.sub_band[0]!r} {cfg.sub_band[1]!r}"
    lines = [format_keyvalue(pairs, "retrieval report").rstrip("\n"), "[spectrum]",
             "frequency_hz,simulated_m2,measured_m2"]
    lines.extend(f"{_fmt(f)},{_fmt(s)},{_fmt(m)}" for f, s, m in
                 zip(result.frequencies, result.simulated, result.measured))
    atomic_write(path, "\n".join(lines) + "\n")


def read_retrieval_report(path):
    """Parse a retrieval report into (key-value dict, per-frequency rows)."""
    path = _require_exists(path)
    pairs = {}
    rows = []
    in_spectrum = False
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == "[spectrum]":
            in_spectrum = True
            continue
        if not in_spectrum:
            if "=" not in line:
                raise FileFormatError(path, line_no,
                                      f"expected 'key = value', got {raw!r}")
            key, _, value = line.partition("=")
            pairs[key.strip()] = value.strip()
            continue
        if line == "frequency_hz,simulated_m2,measured_m2":
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise FileFormatError(path, line_no, f"expected three columns, got {raw!r}")
        try:
            rows.append(tuple(float(tok) for tok in parts))
        except ValueError as exc:
            raise FileFormatError(path, line_no, f"bad number: {exc}") from exc
    return pairs, rows


def write_table(path, header: str, rows) -> None:
    """Delimited sweep/plot table with a single header line."""
    lines = [header]
    lines.extend(",".join(_fmt(v) if isinstance(v, float) else str(v)
                          for v in row) for row in rows)
    atomic_write(path, "\n".join(lines) + "\n")

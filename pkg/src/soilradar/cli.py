"""Command-line front end.

Subcommands: simulate, calibrate, rcs, retrieve, lidar, sweep, plot. All
outputs are text files in the formats the modules define, written atomically.
Exit codes: 0 success, 1 input error, 2 numerical/validity error; error lines
are prefixed `error:` on stderr. The only environment override is
SOILRADAR_OUTPUT_DIR, which replaces the configured output directory.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import fileio
from .canopy import CanopyDescriptor
from .dsp import (DEFAULT_CENTER_FREQUENCY, DEFAULT_SAMPLE_RATE,
                  channel_response, derive_calibration, isolate_ground_return,
                  measured_rcs)
from .emcore import DEFAULT_BAND_HIGH_HZ, DEFAULT_BAND_LOW_HZ, FrequencyGrid
from .errors import InputError, SoilRadarError, ValidityError
from .ground import (SoilDescriptor, ViewGeometry, rcs_vs_incidence)
from .lidar import extract_structure
from .retrieval import (SearchConfig, retrieve, sweep_altitude, sweep_bandwidth,
                        sweep_canopy_ablation, sweep_effective_beamwidth)
from .simulate import (corn_canopy, simulate_scene_scan, soil_from_vwc,
                       soybean_canopy)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_VALIDITY = 2

OUTPUT_DIR_ENV = "SOILRADAR_OUTPUT_DIR"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # map usage errors onto the input exit code
        raise InputError(message)


def _outdir(args) -> Path:
    override = os.environ.get(OUTPUT_DIR_ENV)
    out = Path(override) if override else Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _grid(args) -> FrequencyGrid:
    return FrequencyGrid.linspace(args.band_low, args.band_high, args.n_frequencies)


def _add_band_options(parser):
    parser.add_argument("--band-low", type=float, default=DEFAULT_BAND_LOW_HZ,
                        help="band lower edge, Hz")
    parser.add_argument("--band-high", type=float, default=DEFAULT_BAND_HIGH_HZ,
                        help="band upper edge, Hz")
    parser.add_argument("--n-frequencies", type=int, default=100,
                        help="number of spectrum bins")
    parser.add_argument("--center-frequency", type=float,
                        default=DEFAULT_CENTER_FREQUENCY,
                        help="Ricker center frequency, Hz")


def _load_scene(path) -> dict:
    pairs = fileio.parse_keyvalue(path)
    try:
        scene = {
            "vwc": float(pairs["vwc"]),
            "roughness_m": float(pairs.get("roughness_m", "0.01")),
            "altitudes": [float(tok) for tok in
                          pairs.get("altitudes_m", "6.0").split()],
            "noise_rms": float(pairs.get("noise_rms", "0.0")),
            "seed": int(pairs.get("seed", "0")),
            "canopy": pairs.get("canopy", "none"),
            "canopy_permittivity_real":
                float(pairs.get("canopy_permittivity_real", "28.0")),
            "effective_beamwidth_deg":
                float(pairs.get("effective_beamwidth_deg", "2.0")),
            "location": pairs.get("location", "scene"),
        }
    except KeyError as exc:
        raise InputError(f"scene file {path} is missing required key {exc}") from exc
    except ValueError as exc:
        raise InputError(f"bad scene value in {path}: {exc}") from exc
    return scene


def _scene_canopy(scene) -> CanopyDescriptor | None:
    kind = scene["canopy"]
    if kind == "none":
        return None
    if kind == "corn":
        return corn_canopy(scene["canopy_permittivity_real"])
    if kind == "soybean":
        return soybean_canopy(scene["canopy_permittivity_real"])
    return fileio.read_canopy(kind)


def cmd_simulate(args) -> int:
    out = _outdir(args)
    scene = _load_scene(args.scene)
    soil = soil_from_vwc(scene["vwc"], scene["roughness_m"])
    canopy = _scene_canopy(scene)
    rng = np.random.default_rng(scene["seed"])
    theta_e = math.radians(scene["effective_beamwidth_deg"])
    truth = {
        "vwc": repr(scene["vwc"]),
        "soil_permittivity_real": repr(soil.permittivity.real_part),
        "soil_permittivity_imag": repr(soil.permittivity.imag_part),
        "roughness_m": repr(scene["roughness_m"]),
        "effective_beamwidth_deg": repr(scene["effective_beamwidth_deg"]),
        "noise_rms": repr(scene["noise_rms"]),
        "seed": str(scene["seed"]),
        "canopy": scene["canopy"],
        "altitudes_m": " ".join(repr(a) for a in scene["altitudes"]),
    }
    if canopy is not None:
        truth["canopy_permittivity_real"] = repr(
            canopy.leaf_geometry.permittivity.real_part)
        canopy_path = out / f"{args.prefix}.canopy"
        fileio.write_canopy(canopy_path, canopy)
        print(canopy_path)
    for altitude in scene["altitudes"]:
        view = ViewGeometry(altitude, theta_e)
        scan = simulate_scene_scan(soil, canopy, view, scene["noise_rms"],
                                   args.sample_rate, args.center_frequency,
                                   rng=rng, location=scene["location"])
        scan_path = out / f"{args.prefix}_alt{altitude:g}.ascan"
        fileio.write_ascan(scan_path, scan)
        print(scan_path)
    truth_path = out / f"{args.prefix}.truth"
    fileio.atomic_write(truth_path, fileio.format_keyvalue(truth, "scene truth"))
    print(truth_path)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    out = _outdir(args)
    scans = [fileio.read_ascan(path) for path in args.scans]
    cal = derive_calibration(scans, args.plate_side, _grid(args),
                             args.center_frequency)
    path = out / args.name
    fileio.write_calibration(path, cal)
    print(path)
    return EXIT_OK


def cmd_rcs(args) -> int:
    out = _outdir(args)
    cal = fileio.read_calibration(args.calibration)
    for scan_path in args.scans:
        scan = fileio.read_ascan(scan_path)
        segment = isolate_ground_return(scan, args.center_frequency)
        resp = channel_response(segment, cal.grid)
        spectrum = measured_rcs(resp, segment.peak_range, cal)
        meta = {"range_m": repr(float(segment.peak_range))}
        if scan.location:
            meta["location"] = scan.location
        path = out / (Path(scan_path).stem + ".rcs")
        fileio.write_rcs_spectrum(path, spectrum, meta)
        print(path)
    return EXIT_OK


def _search_config(args, sub_band=None, canopy_enabled=True) -> SearchConfig:
    return SearchConfig(
        soil_eps=np.linspace(args.soil_eps_min, args.soil_eps_max, args.grid_points),
        canopy_eps=np.linspace(args.canopy_eps_min, args.canopy_eps_max,
                               args.grid_points),
        soil_loss_tangent=args.soil_loss_tangent,
        canopy_loss_tangent=args.canopy_loss_tangent,
        sub_band=sub_band,
        canopy_modeling_enabled=canopy_enabled and not args.no_canopy,
    )


def _add_retrieval_options(parser):
    parser.add_argument("--canopy", help="canopy descriptor file")
    parser.add_argument("--roughness", type=float, default=0.01,
                        help="calibrated roughness height, m")
    parser.add_argument("--scattering-beamwidth-deg", type=float, default=5.0)
    parser.add_argument("--effective-beamwidth-deg", type=float, default=2.0)
    parser.add_argument("--altitude", type=float,
                        help="platform altitude, m (defaults to the spectrum's range)")
    parser.add_argument("--soil-eps-min", type=float, default=2.0)
    parser.add_argument("--soil-eps-max", type=float, default=40.0)
    parser.add_argument("--canopy-eps-min", type=float, default=1.5)
    parser.add_argument("--canopy-eps-max", type=float, default=40.0)
    parser.add_argument("--grid-points", type=int, default=500)
    parser.add_argument("--soil-loss-tangent", type=float, default=0.15)
    parser.add_argument("--canopy-loss-tangent", type=float, default=0.30)
    parser.add_argument("--no-canopy", action="store_true",
                        help="disable canopy modeling in the inversion")


def _view_for(args, meta) -> ViewGeometry:
    altitude = args.altitude
    if altitude is None:
        if "range_m" not in meta:
            raise InputError("spectrum carries no range; pass --altitude")
        altitude = float(meta["range_m"])
    return ViewGeometry(altitude, math.radians(args.effective_beamwidth_deg))


def _soil_template(args) -> SoilDescriptor:
    eps = SoilDescriptor.default().permittivity
    return SoilDescriptor(eps, args.roughness,
                          math.radians(args.scattering_beamwidth_deg))


def cmd_retrieve(args) -> int:
    out = _outdir(args)
    canopy = fileio.read_canopy(args.canopy) if args.canopy else None
    cfg = _search_config(args)
    for spec_path in args.spectra:
        spectrum, meta = fileio.read_rcs_spectrum(spec_path)
        view = _view_for(args, meta)
        result = retrieve(spectrum, canopy, _soil_template(args), view, cfg)
        report = out / (Path(spec_path).stem + ".retrieval")
        fileio.write_retrieval_report(report, result, cfg,
                                      {"source": str(spec_path)})
        print(report)
    return EXIT_OK


def cmd_lidar(args) -> int:
    out = _outdir(args)
    allometry = fileio.read_allometry(args.allometry)
    if args.crop not in allometry:
        raise InputError(f"crop {args.crop!r} missing from the allometry table")
    for cloud_path in args.clouds:
        cloud = fileio.read_point_cloud(cloud_path)
        estimate = extract_structure(cloud, args.crop,
                                     allometry[args.crop]["leaf_area"])
        path = out / (Path(cloud_path).stem + ".structure")
        fileio.write_structure(path, estimate)
        print(path)
    return EXIT_OK


def cmd_sweep(args) -> int:
    out = _outdir(args)
    canopy = fileio.read_canopy(args.canopy) if args.canopy else None
    soil = _soil_template(args)
    cfg = _search_config(args)
    if args.kind == "altitude":
        cal = fileio.read_calibration(args.calibration)
        scans = [fileio.read_ascan(p) for p in args.inputs]
        view = ViewGeometry(scans[0].altitude_est or 6.0,
                            math.radians(args.effective_beamwidth_deg))
        rows = sweep_altitude(scans, cal, canopy, soil, view, cfg)
        path = out / "sweep_altitude.csv"
        fileio.write_table(path, "altitude_m,vwc", rows)
        print(path)
        return EXIT_OK
    if len(args.inputs) != 1:
        raise InputError(f"sweep {args.kind} takes exactly one spectrum file")
    spectrum, meta = fileio.read_rcs_spectrum(args.inputs[0])
    view = _view_for(args, meta)
    if args.true_vwc is None:
        raise InputError(f"sweep {args.kind} requires --true-vwc")
    if args.kind == "beamwidth":
        thetas = np.radians(np.arange(args.theta_min_deg,
                                      args.theta_max_deg + 1e-9,
                                      args.theta_step_deg))
        rows = [(math.degrees(t), v, e) for t, v, e in
                sweep_effective_beamwidth(spectrum, canopy, soil, view, cfg,
                                          thetas, args.true_vwc)]
        path = out / "sweep_beamwidth.csv"
        fileio.write_table(path, "theta_e_deg,vwc,vwc_error", rows)
    elif args.kind == "bandwidth":
        f = spectrum.grid.frequencies
        bands = [(float(f[0]), float(f[-1])),
                 (float(f[-1]) - args.reduced_band_hz, float(f[-1]))]
        rows = sweep_bandwidth(spectrum, canopy, soil, view, cfg, bands,
                               args.true_vwc)
        path = out / "sweep_bandwidth.csv"
        fileio.write_table(path, "band_low_hz,band_high_hz,vwc,vwc_error", rows)
    elif args.kind == "canopy-ablation":
        if canopy is None:
            raise InputError("canopy ablation sweep requires --canopy")
        rows = sweep_canopy_ablation(spectrum, canopy, soil, view, cfg,
                                     args.true_vwc)
        path = out / "sweep_canopy_ablation.csv"
        fileio.write_table(path, "canopy_modeling,vwc,vwc_error", rows)
    else:
        raise InputError(f"unknown sweep kind {args.kind!r}")
    print(path)
    return EXIT_OK


def cmd_plot(args) -> int:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = _outdir(args)
    path = Path(args.table)
    if not path.exists():
        raise InputError(f"no such file: {path}")
    if args.kind == "spectrum":
        spectrum, _ = fileio.read_rcs_spectrum(path)
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(spectrum.grid.frequencies / 1e6, spectrum.to_dbsm())
        ax.set_xlabel("frequency (MHz)")
        ax.set_ylabel("RCS (dBsm)")
    elif args.kind == "incidence":
        from .simulate import soybean_canopy

        soil = _soil_template(args)
        canopy = fileio.read_canopy(args.canopy) if args.canopy else None
        if canopy is None:
            canopy = soybean_canopy(lai=0.0)  # empty canopy, bare ground
        view = ViewGeometry(args.altitude or 6.0,
                            math.radians(args.effective_beamwidth_deg))
        thetas = np.radians(np.linspace(0.0, 30.0, 121))
        rows = rcs_vs_incidence(soil, canopy, view, args.center_frequency, thetas)
        fileio.write_table(out / "incidence.csv",
                           "theta_deg,coherent_m2,incoherent_m2",
                           [(math.degrees(t), c, i) for t, c, i in rows])
        fig, ax = plt.subplots(figsize=(6, 4))
        deg = [math.degrees(r[0]) for r in rows]
        with np.errstate(divide="ignore"):
            ax.plot(deg, 10 * np.log10([r[1] for r in rows]), label="coherent")
            ax.plot(deg, 10 * np.log10([max(r[2], 1e-30) for r in rows]),
                    label="incoherent")
        ax.set_xlabel("incidence angle (deg)")
        ax.set_ylabel("RCS (dBsm)")
        ax.legend()
    else:  # generic sweep table: first column x, second y
        rows = [line.split(",") for line in
                path.read_text().strip().splitlines()]
        header, data = rows[0], rows[1:]
        x = [float(r[0]) for r in data]
        y = [float(r[-1]) for r in data]
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(x, y, marker="o")
        ax.set_xlabel(header[0])
        ax.set_ylabel(header[-1])
    svg = out / (path.stem + ".svg")
    fig.tight_layout()
    fig.savefig(svg)
    plt.close(fig)
    print(svg)
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="soilradar",
                     description="Through-canopy soil moisture retrieval toolkit")
    parser.add_argument("--output-dir", default="out", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize scene A-scans plus truth")
    p.add_argument("--scene", required=True, help="scene spec file (key = value)")
    p.add_argument("--prefix", default="scene")
    p.add_argument("--sample-rate", type=float, default=DEFAULT_SAMPLE_RATE)
    _add_band_options(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="derive C(f) from plate scans")
    p.add_argument("scans", nargs="+", help="plate A-scan files")
    p.add_argument("--plate-side", type=float, required=True, help="plate side, m")
    p.add_argument("--name", default="calibration.cal")
    _add_band_options(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("rcs", help="compute calibrated RCS spectra from scans")
    p.add_argument("scans", nargs="+", help="A-scan files")
    p.add_argument("--calibration", required=True)
    p.add_argument("--center-frequency", type=float,
                   default=DEFAULT_CENTER_FREQUENCY)
    p.set_defaults(func=cmd_rcs)

    p = sub.add_parser("retrieve", help="invert RCS spectra for soil moisture")
    p.add_argument("spectra", nargs="+", help="RCS spectrum files")
    _add_retrieval_options(p)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("lidar", help="extract canopy structure from point clouds")
    p.add_argument("clouds", nargs="+", help="point cloud files (x y z)")
    p.add_argument("--crop", required=True, choices=["corn", "soybean"])
    p.add_argument("--allometry", required=True, help="allometry csv")
    p.set_defaults(func=cmd_lidar)

    p = sub.add_parser("sweep", help="sensitivity sweeps")
    p.add_argument("kind", choices=["beamwidth", "bandwidth", "altitude",
                                    "canopy-ablation"])
    p.add_argument("inputs", nargs="+",
                   help="spectrum file, or A-scan files for the altitude sweep")
    p.add_argument("--calibration", help="calibration file (altitude sweep)")
    p.add_argument("--true-vwc", type=float, help="ground-truth VWC for errors")
    p.add_argument("--theta-min-deg", type=float, default=0.5)
    p.add_argument("--theta-max-deg", type=float, default=6.0)
    p.add_argument("--theta-step-deg", type=float, default=0.25)
    p.add_argument("--reduced-band-hz", type=float, default=100e6)
    _add_retrieval_options(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="emit plot data and an SVG rendering")
    p.add_argument("table", help="spectrum or sweep table file")
    p.add_argument("--kind", default="sweep",
                   choices=["spectrum", "incidence", "sweep"])
    p.add_argument("--canopy")
    p.add_argument("--altitude", type=float)
    p.add_argument("--roughness", type=float, default=0.01)
    p.add_argument("--scattering-beamwidth-deg", type=float, default=5.0)
    p.add_argument("--effective-beamwidth-deg", type=float, default=2.0)
    p.add_argument("--center-frequency", type=float,
                   default=DEFAULT_CENTER_FREQUENCY)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ValidityError, SoilRadarError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDITY


if __name__ == "__main__":
    sys.exit(main())

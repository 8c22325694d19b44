"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest -s tests/test_acceptance.py` to see the per-criterion lines.
All scenes come from the built-in synthetic simulator; every expected value
is either an analytic closed form or the simulator's own ground truth.
"""

import math
import time

import numpy as np
import pytest

from soilradar.canopy import DiskGeometry, OrientationDistribution
from soilradar.dsp import (channel_response, derive_calibration,
                           isolate_ground_return, measured_rcs, plate_rcs,
                           synthesize_ascan)
from soilradar.emcore import (SPEED_OF_LIGHT, ComplexPermittivity, FrequencyGrid,
                              fresnel_reflectivity, topp_permittivity, topp_vwc)
from soilradar.ground import (RcsSpectrum, SoilDescriptor, ViewGeometry,
                              coherent_rcs, effective_area, incoherent_rcs)
from soilradar.lidar import (PointCloud, build_chm, canopy_height, detect_rows,
                             estimate_lai, normalize_ground, plant_density_corn,
                             plant_density_soybean)
from soilradar.retrieval import (SearchConfig, forward_rcs_values, retrieve,
                                 sweep_altitude, sweep_canopy_ablation,
                                 sweep_effective_beamwidth)
from soilradar.simulate import (apply_spectrum_noise, corn_canopy,
                                raycast_disk_canopy, row_crop_cloud,
                                simulate_plate_scan, simulate_scene_scan,
                                soil_from_vwc, soybean_canopy)
from soilradar.canopy import disk_forward_amplitude, orientation_average_im
from soilradar.dsp import AScan

PLATE_SIDE = 0.9
ROUGHNESS = 0.012


def _report(number, description, passed, elapsed):
    status = "PASS" if passed else "FAIL"
    print(f"\nACCEPTANCE {number:02d} {status} ({elapsed:.1f}s): {description}")
    assert passed, f"criterion {number} failed: {description}"


def _scene_battery():
    """20 scenes spanning VWC 3-26% over bare, corn-like and soybean-like canopies."""
    scenes = []
    for i, vwc in enumerate(np.linspace(0.03, 0.26, 7)):
        scenes.append((float(vwc), None, 6.0 if i % 2 else 8.0))
    for i, vwc in enumerate(np.linspace(0.04, 0.25, 7)):
        scenes.append((float(vwc), corn_canopy(28.0), 6.0 if i % 2 else 8.0))
    for i, vwc in enumerate(np.linspace(0.05, 0.24, 6)):
        scenes.append((float(vwc), soybean_canopy(30.0), 6.0 if i % 2 else 8.0))
    return scenes


def _pipeline_vwc(scan, canopy, cal, theta_e=math.radians(2.0), cfg=None):
    segment = isolate_ground_return(scan)
    resp = channel_response(segment, cal.grid)
    r = segment.peak_range
    spectrum = measured_rcs(resp, r, cal)
    soil_template = SoilDescriptor(SoilDescriptor.default().permittivity, ROUGHNESS)
    view = ViewGeometry(r, theta_e)
    return retrieve(spectrum, canopy, soil_template, view, cfg)


def test_criterion_01_plate_calibration_roundtrip(grid):
    start = time.time()
    scans = [simulate_plate_scan(r, PLATE_SIDE) for r in np.linspace(6.0, 9.0, 7)]
    cal = derive_calibration(scans, PLATE_SIDE, grid)
    fresh = simulate_plate_scan(5.5, PLATE_SIDE)
    segment = isolate_ground_return(fresh)
    resp = channel_response(segment, grid)
    sigma = measured_rcs(resp, segment.peak_range, cal)
    err_db = 10.0 * np.log10(sigma.values / plate_rcs(PLATE_SIDE, grid.frequencies))
    mask = (grid.frequencies >= 300e6) & (grid.frequencies <= 800e6)
    elapsed = time.time() - start
    passed = bool(np.max(np.abs(err_db[mask])) < 1.0) and elapsed < 10.0
    _report(1, f"plate calibration round-trip within 1 dB over 300-800 MHz "
               f"(worst {np.max(np.abs(err_db[mask])):.2g} dB)", passed, elapsed)


def test_criterion_02_coherent_dominance():
    start = time.time()
    soil = SoilDescriptor.default()  # s = 1 cm
    area = effective_area(ViewGeometry(6.0))
    margins = []
    for theta in np.radians(np.linspace(0.0, 1.99, 25)):
        coh = coherent_rcs(soil, 550e6, float(theta), area)
        incoh = incoherent_rcs(soil, 550e6, float(theta), area)
        margins.append(10.0 * math.log10(coh / incoh))
    elapsed = time.time() - start
    passed = min(margins) >= 10.0 and elapsed < 1.0
    _report(2, f"coherent exceeds incoherent by >= 10 dB below 2 deg "
               f"(worst margin {min(margins):.1f} dB)", passed, elapsed)


def test_criterion_03_end_to_end_noiseless(grid, calibration):
    start = time.time()
    cpu_start = time.process_time()
    cfg = SearchConfig()
    worst = 0.0
    for vwc, canopy, altitude in _scene_battery():
        soil = soil_from_vwc(vwc, ROUGHNESS)
        scan = simulate_scene_scan(soil, canopy, ViewGeometry(altitude))
        result = _pipeline_vwc(scan, canopy, calibration, cfg=cfg)
        offset = abs(result.soil_permittivity.real_part - topp_permittivity(vwc))
        worst = max(worst, offset / cfg.soil_step())
    cpu = time.process_time() - cpu_start  # sums all threads: a single-thread bound
    elapsed = time.time() - start
    passed = worst <= 1.0 and cpu < 300.0
    _report(3, f"noiseless simulate-calibrate-rcs-retrieve loop recovers VWC "
               f"within one grid step on 20 scenes (worst {worst:.2f} steps, "
               f"{cpu:.1f} s CPU)", passed, elapsed)


def test_criterion_04_noise_robustness(grid, view):
    start = time.time()
    rng = np.random.default_rng(2024)
    means = []
    for vwc, canopy in [(0.18, corn_canopy(28.0)), (0.15, soybean_canopy(30.0))]:
        soil = soil_from_vwc(vwc, ROUGHNESS)
        clean = RcsSpectrum(grid, forward_rcs_values(grid.frequencies, soil,
                                                     canopy, view))
        template = SoilDescriptor(soil.permittivity, ROUGHNESS)
        errors = []
        for _ in range(100):
            noisy = apply_spectrum_noise(clean, 1.0, rng)
            result = retrieve(noisy, canopy, template, view)
            errors.append(abs(result.vwc.vwc - vwc))
        means.append(float(np.mean(errors)))
    elapsed = time.time() - start
    passed = max(means) <= 0.02 and elapsed < 900.0
    _report(4, f"1 dB spectrum noise, 100 draws per canopied scene: mean VWC "
               f"error <= 2% (worst mean {max(means) * 100:.2f}%)", passed, elapsed)


def test_criterion_05_altitude_consistency(grid, calibration):
    start = time.time()
    canopy = corn_canopy(28.0)
    soil = soil_from_vwc(0.18, ROUGHNESS)
    scans = [simulate_scene_scan(soil, canopy, ViewGeometry(alt))
             for alt in (6.0, 8.0)]
    rows = sweep_altitude(scans, calibration, canopy,
                          SoilDescriptor(soil.permittivity, ROUGHNESS),
                          ViewGeometry(6.0))
    diff = abs(rows[0][1] - rows[1][1])
    elapsed = time.time() - start
    passed = diff < 0.015
    _report(5, f"retrieved VWC consistent across 6 m and 8 m altitudes "
               f"(difference {diff * 100:.3f}%)", passed, elapsed)


def test_criterion_06_bandwidth_ablation(view):
    start = time.time()
    grid_full = FrequencyGrid.linspace(200e6, 900e6, 100)
    grid_top = FrequencyGrid.linspace(800e6, 900e6, 100)

    def mc_error(vwc, canopy, grid, seed):
        soil = soil_from_vwc(vwc, ROUGHNESS)
        clean = RcsSpectrum(grid, forward_rcs_values(grid.frequencies, soil,
                                                     canopy, view))
        template = SoilDescriptor(soil.permittivity, ROUGHNESS)
        rng = np.random.default_rng(seed)
        errors = []
        for _ in range(20):
            noisy = apply_spectrum_noise(clean, 1.0, rng)
            errors.append(abs(retrieve(noisy, canopy, template, view).vwc.vwc - vwc))
        return float(np.mean(errors))

    canopied_ok = True
    for seed, (vwc, canopy) in enumerate([(0.18, corn_canopy(28.0)),
                                          (0.15, soybean_canopy(30.0))]):
        full = mc_error(vwc, canopy, grid_full, 100 + seed)
        top = mc_error(vwc, canopy, grid_top, 100 + seed)
        canopied_ok = canopied_ok and full <= top
    bare_full = mc_error(0.18, None, grid_full, 200)
    bare_top = mc_error(0.18, None, grid_top, 200)
    gap = abs(bare_full - bare_top)
    elapsed = time.time() - start
    passed = canopied_ok and gap < 0.005
    _report(6, f"full-band error <= top-100 MHz error on canopied scenes; "
               f"bare-soil band gap {gap * 100:.2f}% < 0.5%", passed, elapsed)


def test_criterion_07_canopy_ablation(grid, view):
    start = time.time()
    canopy = soybean_canopy(35.0, lai=6.5)  # dense, wet
    vwc = 0.20
    soil = soil_from_vwc(vwc, ROUGHNESS)
    measured = RcsSpectrum(grid, forward_rcs_values(grid.frequencies, soil,
                                                    canopy, view))
    rows = sweep_canopy_ablation(measured, canopy,
                                 SoilDescriptor(soil.permittivity, ROUGHNESS),
                                 view, None, vwc)
    err_on = rows[0][2]
    err_off = rows[1][2]
    elapsed = time.time() - start
    passed = err_off >= 2.0 * err_on
    _report(7, f"disabling canopy modeling at least doubles the VWC error "
               f"({err_off * 100:.2f}% vs {err_on * 100:.2f}%)", passed, elapsed)


def test_criterion_08_effective_beamwidth_sweep(grid, view):
    start = time.time()
    canopy = corn_canopy(26.0)
    vwc = 0.17
    soil = soil_from_vwc(vwc, ROUGHNESS)
    measured = RcsSpectrum(grid, forward_rcs_values(grid.frequencies, soil,
                                                    canopy, view))  # theta_e = 2 deg
    thetas = np.radians(np.arange(0.5, 6.001, 0.25))
    rows = sweep_effective_beamwidth(measured, canopy,
                                     SoilDescriptor(soil.permittivity, ROUGHNESS),
                                     view, None, thetas, vwc)
    errors = [r[2] for r in rows]
    best = math.degrees(rows[int(np.argmin(errors))][0])
    elapsed = time.time() - start
    passed = abs(best - 2.0) <= 0.25 and all(np.isfinite(errors))
    _report(8, f"beamwidth sweep error minimum at {best:.2f} deg, within "
               f"0.25 deg of the generation value 2 deg", passed, elapsed)


def test_criterion_09_lidar_suite():
    start = time.time()
    results = {}

    corn_pts, corn_truth = row_crop_cloud("corn", rows_along="x",
                                          rng=np.random.default_rng(7))
    cloud = normalize_ground(PointCloud(corn_pts))
    chm_raw = build_chm(cloud, smooth=False)
    chm = build_chm(cloud)
    rows = detect_rows(chm)
    results["corn spacing"] = (rows.mean_spacing, corn_truth.row_spacing, 0.05)
    results["corn height"] = (canopy_height(chm_raw), corn_truth.height, 0.05)
    results["corn density"] = (plant_density_corn(cloud, rows).density,
                               corn_truth.n_plants / 100.0, 0.15)

    soy_pts, soy_truth = row_crop_cloud("soybean", plant_spacing=0.33, height=0.9,
                                        rows_along="y",
                                        rng=np.random.default_rng(8))
    cloud = normalize_ground(PointCloud(soy_pts))
    chm_raw = build_chm(cloud, smooth=False)
    chm = build_chm(cloud)
    rows = detect_rows(chm)
    results["soybean spacing"] = (rows.mean_spacing, soy_truth.row_spacing, 0.05)
    results["soybean height"] = (canopy_height(chm_raw), soy_truth.height, 0.05)
    results["soybean density"] = (plant_density_soybean(chm, rows).density,
                                  soy_truth.n_plants / 100.0, 0.15)

    lai_points = raycast_disk_canopy(lai=3.0, rng=np.random.default_rng(17))
    results["LAI"] = (estimate_lai(PointCloud(lai_points)), 3.0, 0.15)

    elapsed = time.time() - start
    failures = [f"{name}: {est:.3f} vs {true:.3f}"
                for name, (est, true, tol) in results.items()
                if abs(est - true) > tol * true]
    passed = not failures and elapsed < 120.0
    worst = max(abs(e - t) / t for e, t, _ in results.values())
    _report(9, f"LiDAR suite: spacing/height within 5%, density/LAI within 15% "
               f"(worst relative error {worst * 100:.1f}%)"
               + (f"; failures: {failures}" if failures else ""), passed, elapsed)


def test_criterion_10_property_suite(grid, view):
    start = time.time()
    checks = {}

    # optical-theorem sign across the band for lossy scatterers
    ok = True
    for eps in (ComplexPermittivity(5.0, 0.5), ComplexPermittivity(30.0, 10.0)):
        disk = DiskGeometry(0.05, 3e-4, eps)
        for f in np.linspace(200e6, 900e6, 8):
            ok = ok and disk_forward_amplitude(disk, f, 0.0, (0.4, 0.6)).imag > 0
    checks["optical theorem"] = ok

    # Fresnel bounds and monotonicity
    eps_axis = np.linspace(1.0, 81.0, 200)
    gammas = [fresnel_reflectivity(ComplexPermittivity(float(e))) for e in eps_axis]
    checks["fresnel"] = (all(0.0 <= g <= 1.0 for g in gammas)
                         and all(b >= a for a, b in zip(gammas, gammas[1:])))

    # Topp round-trip identity
    vwcs = np.linspace(0.02, 0.55, 40)
    checks["topp roundtrip"] = all(
        abs(topp_vwc(topp_permittivity(float(v))).vwc - v) <= 1e-6 for v in vwcs)

    # effective-area R^2 homogeneity
    checks["area scaling"] = (
        effective_area(ViewGeometry(12.0))
        == pytest.approx(4.0 * effective_area(ViewGeometry(6.0)), rel=1e-12))

    # argmin scale invariance
    canopy = soybean_canopy(30.0)
    soil = soil_from_vwc(0.2, ROUGHNESS)
    measured = RcsSpectrum(grid, forward_rcs_values(grid.frequencies, soil,
                                                    canopy, view))
    template = SoilDescriptor(soil.permittivity, ROUGHNESS)
    base = retrieve(measured, canopy, template, view)
    scaled = retrieve(RcsSpectrum(grid, 4.0 * measured.values), canopy, template,
                      view.with_altitude(view.altitude * 2.0))
    checks["argmin scale invariance"] = (
        (base.soil_index, base.canopy_index)
        == (scaled.soil_index, scaled.canopy_index))

    # gating translation consistency
    r = 6.0
    delay = 2.0 * r / SPEED_OF_LIGHT
    scan = synthesize_ascan([(delay, 1.0)], duration=200e-9, altitude_est=r)
    shifted = AScan(np.concatenate([np.zeros(40), scan.samples]),
                    scan.sample_rate, r)
    a = isolate_ground_return(scan)
    b = isolate_ground_return(shifted)
    checks["gating translation"] = (
        round((b.gate_start - a.gate_start) * scan.sample_rate) == 40)

    # orientation quadrature refinement
    disk = DiskGeometry(0.05, 3e-4, ComplexPermittivity(30.0, 10.0))

    def amp(orientation):
        return disk_forward_amplitude(disk, 550e6, 0.0, orientation)

    coarse = orientation_average_im(amp, OrientationDistribution.uniform())
    fine = orientation_average_im(amp, OrientationDistribution.uniform(),
                                  n_psi=64, n_delta=64)
    checks["quadrature refinement"] = abs(fine - coarse) <= 0.01 * abs(coarse)

    elapsed = time.time() - start
    failures = [name for name, ok in checks.items() if not ok]
    passed = not failures and elapsed < 120.0
    _report(10, "property suite (optical theorem, Fresnel, Topp, area scaling, "
                "argmin invariance, gating translation, quadrature)"
                + (f"; failures: {failures}" if failures else ""), passed, elapsed)


def test_criterion_11_grid_search_runtime(grid, view):
    canopy = corn_canopy(28.0)
    soil = soil_from_vwc(0.18, ROUGHNESS)
    measured = RcsSpectrum(grid, forward_rcs_values(grid.frequencies, soil,
                                                    canopy, view))
    template = SoilDescriptor(soil.permittivity, ROUGHNESS)
    start = time.time()
    cpu_start = time.process_time()
    result = retrieve(measured, canopy, template, view, SearchConfig())
    cpu = time.process_time() - cpu_start  # sums all threads: a single-thread bound
    elapsed = time.time() - start
    passed = cpu < 60.0 and result.residual >= 0.0
    _report(11, f"one 500x500 retrieval over 100 frequency bins in "
                f"{cpu:.3f} s CPU (< 60 s single-threaded)", passed, elapsed)

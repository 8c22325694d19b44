import math

import numpy as np
import pytest

from soilradar.emcore import ComplexPermittivity, FrequencyGrid, topp_permittivity
from soilradar.errors import BandError, ValidityError
from soilradar.ground import RcsSpectrum, SoilDescriptor, ViewGeometry, effective_area, scene_rcs
from soilradar.retrieval import (SearchConfig, calibrate_roughness,
                                 forward_rcs_values, retrieve, sweep_altitude,
                                 sweep_bandwidth, sweep_canopy_ablation,
                                 sweep_effective_beamwidth)
from soilradar.simulate import (apply_spectrum_noise, corn_canopy,
                                simulate_scene_scan, soil_from_vwc,
                                soybean_canopy)


def make_measured(grid, vwc, canopy, view, roughness=0.012):
    soil = soil_from_vwc(vwc, roughness)
    return RcsSpectrum(grid, forward_rcs_values(grid.frequencies, soil, canopy, view)), soil


class TestForwardConsistency:
    def test_matches_scene_rcs_over_small_grid(self, view):
        grid = FrequencyGrid.linspace(n=12)
        cfg = SearchConfig(soil_eps=np.linspace(4.0, 16.0, 5),
                           canopy_eps=np.linspace(10.0, 34.0, 5))
        canopy = corn_canopy(28.0)
        soil_template = SoilDescriptor(ComplexPermittivity(5.0), 0.012)
        measured, _ = make_measured(grid, 0.18, canopy, view)
        result = retrieve(measured, canopy, soil_template, view, cfg)

        # brute-force re-evaluation through the scalar forward model
        best = None
        for i, es in enumerate(cfg.soil_eps):
            soil_i = soil_template.with_permittivity(
                ComplexPermittivity.from_loss_tangent(es, cfg.soil_loss_tangent))
            for j, ec in enumerate(cfg.canopy_eps):
                canopy_j = canopy.with_permittivity(
                    ComplexPermittivity.from_loss_tangent(ec, cfg.canopy_loss_tangent))
                sim = scene_rcs(canopy_j, soil_i, view, grid)
                res = float(np.sum((sim.values - measured.values) ** 2))
                if best is None or res < best[0]:
                    best = (res, i, j)
        assert (result.soil_index, result.canopy_index) == (best[1], best[2])
        assert result.residual == pytest.approx(best[0], rel=1e-9)

    def test_residual_is_global_minimum(self, view):
        grid = FrequencyGrid.linspace(n=10)
        cfg = SearchConfig(soil_eps=np.linspace(3.0, 20.0, 12),
                           canopy_eps=np.linspace(5.0, 35.0, 11))
        canopy = soybean_canopy(30.0)
        soil_template = SoilDescriptor(ComplexPermittivity(5.0), 0.012)
        measured, _ = make_measured(grid, 0.15, canopy, view)
        result = retrieve(measured, canopy, soil_template, view, cfg)
        for i, es in enumerate(cfg.soil_eps):
            soil_i = soil_template.with_permittivity(
                ComplexPermittivity.from_loss_tangent(es, cfg.soil_loss_tangent))
            for j, ec in enumerate(cfg.canopy_eps):
                canopy_j = canopy.with_permittivity(
                    ComplexPermittivity.from_loss_tangent(ec, cfg.canopy_loss_tangent))
                sim = scene_rcs(canopy_j, soil_i, view, grid)
                res = float(np.sum((sim.values - measured.values) ** 2))
                assert result.residual <= res + 1e-12


class TestRetrieve:
    def test_noiseless_recovery_within_one_step(self, grid, view):
        cfg = SearchConfig()
        for vwc, canopy in [(0.08, None), (0.18, corn_canopy(28.0)),
                            (0.23, soybean_canopy(30.0))]:
            measured, soil = make_measured(grid, vwc, canopy, view)
            result = retrieve(measured, canopy,
                              SoilDescriptor(soil.permittivity, 0.012), view, cfg)
            true_eps = topp_permittivity(vwc)
            assert abs(result.soil_permittivity.real_part - true_eps) <= cfg.soil_step()

    def test_on_grid_truth_recovered_exactly(self, grid, view):
        # truth placed on the search grid: the residual vanishes at the true
        # cell, so both permittivities must come back exactly
        cfg = SearchConfig()
        eps_s_true = float(cfg.soil_eps[104])
        eps_c_true = float(cfg.canopy_eps[345])
        soil = SoilDescriptor(
            ComplexPermittivity.from_loss_tangent(eps_s_true, cfg.soil_loss_tangent),
            0.012)
        canopy = corn_canopy(28.0).with_permittivity(
            ComplexPermittivity.from_loss_tangent(eps_c_true, cfg.canopy_loss_tangent))
        measured = RcsSpectrum(grid, forward_rcs_values(grid.frequencies, soil,
                                                        canopy, view))
        result = retrieve(measured, canopy, soil, view, cfg)
        assert result.soil_index == 104
        assert result.canopy_index == 345
        assert result.soil_permittivity.real_part == eps_s_true
        assert result.canopy_permittivity.real_part == eps_c_true

    def test_bare_soil_canopy_inert(self, grid, view):
        cfg = SearchConfig(canopy_modeling_enabled=False)
        measured, soil = make_measured(grid, 0.15, None, view)
        result = retrieve(measured, None,
                          SoilDescriptor(soil.permittivity, 0.012), view, cfg)
        assert result.canopy_index == 0  # residual independent of eps_c

        # matches an independent single-variable fit over the soil axis
        theta = view.effective_beamwidth
        area = effective_area(view)
        best = None
        for i, es in enumerate(cfg.soil_eps):
            soil_i = SoilDescriptor(
                ComplexPermittivity.from_loss_tangent(es, cfg.soil_loss_tangent),
                0.012)
            sim = np.array([
                float(np.squeeze(__import__("soilradar.ground", fromlist=["coherent_rcs"]).coherent_rcs(
                    soil_i, float(f), theta, area)))
                for f in grid.frequencies])
            res = float(np.sum((sim - measured.values) ** 2))
            if best is None or res < best[1]:
                best = (i, res)
        assert result.soil_index == best[0]

    def test_scale_invariance_of_argmin(self, grid, view):
        cfg = SearchConfig()
        canopy = soybean_canopy(30.0)
        measured, soil = make_measured(grid, 0.2, canopy, view)
        template = SoilDescriptor(soil.permittivity, 0.012)
        base = retrieve(measured, canopy, template, view, cfg)
        c = 3.0
        scaled_view = view.with_altitude(view.altitude * math.sqrt(c))
        scaled = retrieve(RcsSpectrum(grid, c * measured.values), canopy,
                          template, scaled_view, cfg)
        assert (base.soil_index, base.canopy_index) == \
            (scaled.soil_index, scaled.canopy_index)

    def test_monotone_transfer(self, grid, view):
        cfg = SearchConfig()
        canopy = corn_canopy(28.0)
        retrieved = []
        for vwc in (0.05, 0.10, 0.15, 0.20, 0.25):
            measured, soil = make_measured(grid, vwc, canopy, view)
            result = retrieve(measured, canopy,
                              SoilDescriptor(soil.permittivity, 0.012), view, cfg)
            retrieved.append(result.vwc.vwc)
        assert all(b >= a for a, b in zip(retrieved, retrieved[1:]))

    def test_noise_robustness_small(self, grid, view, rng):
        canopy = corn_canopy(28.0)
        measured, soil = make_measured(grid, 0.18, canopy, view)
        template = SoilDescriptor(soil.permittivity, 0.012)
        errors = []
        for _ in range(20):
            noisy = apply_spectrum_noise(measured, 1.0, rng)
            result = retrieve(noisy, canopy, template, view)
            errors.append(abs(result.vwc.vwc - 0.18))
        assert np.mean(errors) <= 0.02

    def test_ablation_direction(self, grid, view):
        canopy = soybean_canopy(35.0, lai=6.0)
        measured, soil = make_measured(grid, 0.2, canopy, view)
        template = SoilDescriptor(soil.permittivity, 0.012)
        on = retrieve(measured, canopy, template, view, SearchConfig())
        off = retrieve(measured, canopy, template, view,
                       SearchConfig(canopy_modeling_enabled=False))
        assert abs(off.vwc.vwc - 0.2) >= abs(on.vwc.vwc - 0.2)

    def test_determinism(self, grid, view):
        canopy = corn_canopy(28.0)
        measured, soil = make_measured(grid, 0.18, canopy, view)
        template = SoilDescriptor(soil.permittivity, 0.012)
        a = retrieve(measured, canopy, template, view)
        b = retrieve(measured, canopy, template, view)
        assert (a.soil_index, a.canopy_index, a.residual) == \
            (b.soil_index, b.canopy_index, b.residual)

    def test_single_frequency_band(self, grid, view):
        cfg = SearchConfig(sub_band=(546e6, 552e6))  # selects one bin
        canopy = corn_canopy(28.0)
        measured, soil = make_measured(grid, 0.18, canopy, view)
        result = retrieve(measured, canopy,
                          SoilDescriptor(soil.permittivity, 0.012), view, cfg)
        assert result.frequencies.size == 1
        assert 0.0 <= result.vwc.vwc <= 1.0
        assert isinstance(result.boundary_hit, bool)

    def test_empty_sub_band(self, grid, view):
        cfg = SearchConfig(sub_band=(901e6, 950e6))
        measured, soil = make_measured(grid, 0.18, None, view)
        with pytest.raises(BandError):
            retrieve(measured, None, SoilDescriptor(soil.permittivity, 0.012),
                     view, cfg)

    def test_all_zero_spectrum(self, grid, view):
        zero = RcsSpectrum(grid, np.zeros(len(grid)))
        with pytest.raises(ValidityError):
            retrieve(zero, None, SoilDescriptor.default(), view)

    def test_boundary_hit_flagged(self, grid, view):
        # truth far below the search range forces a boundary argmin
        cfg = SearchConfig(soil_eps=np.linspace(20.0, 40.0, 50))
        measured, soil = make_measured(grid, 0.05, None, view)
        result = retrieve(measured, None,
                          SoilDescriptor(soil.permittivity, 0.012), view, cfg)
        assert result.soil_index == 0
        assert result.soil_boundary_hit

    def test_db_residual_mode(self, grid, view):
        cfg = SearchConfig(residual_in_db=True)
        canopy = corn_canopy(28.0)
        measured, soil = make_measured(grid, 0.18, canopy, view)
        result = retrieve(measured, canopy,
                          SoilDescriptor(soil.permittivity, 0.012), view, cfg)
        true_eps = topp_permittivity(0.18)
        assert abs(result.soil_permittivity.real_part - true_eps) <= 2 * cfg.soil_step()

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SearchConfig(soil_eps=np.array([]))
        with pytest.raises(ValueError):
            SearchConfig(canopy_eps=np.array([3.0, 2.0]))


class TestRoughnessCalibration:
    def test_recovers_known_roughness(self, grid, view):
        measured, soil = make_measured(grid, 0.22, None, roughness=0.012, view=view)
        fit = calibrate_roughness(measured, 0.22, view)
        assert abs(fit.roughness_m - 0.012) <= 1e-3

    def test_smooth_scene(self, grid, view):
        measured, soil = make_measured(grid, 0.22, None, roughness=0.0, view=view)
        fit = calibrate_roughness(measured, 0.22, view)
        assert fit.roughness_m <= 5e-4

    def test_altitude_invariance(self, grid):
        for alt in (6.0, 8.0):
            view = ViewGeometry(alt)
            measured, _ = make_measured(grid, 0.22, None, roughness=0.012, view=view)
            fit = calibrate_roughness(measured, 0.22, view)
            assert abs(fit.roughness_m - 0.012) <= 1e-3


class TestSweeps:
    def test_beamwidth_minimum_near_truth(self, grid, view):
        canopy = corn_canopy(26.0)
        measured, soil = make_measured(grid, 0.17, canopy, view)
        template = SoilDescriptor(soil.permittivity, 0.012)
        thetas = np.radians(np.arange(0.5, 6.01, 0.25))
        rows = sweep_effective_beamwidth(measured, canopy, template, view, None,
                                         thetas, 0.17)
        errors = np.array([r[2] for r in rows])
        assert np.all(np.isfinite(errors))
        best_theta = rows[int(np.argmin(errors))][0]
        assert abs(math.degrees(best_theta) - 2.0) <= 0.25

    def test_beamwidth_error_grows_beyond_truth(self, grid, view):
        canopy = corn_canopy(26.0)
        measured, soil = make_measured(grid, 0.17, canopy, view)
        template = SoilDescriptor(soil.permittivity, 0.012)
        thetas = np.radians([3.0, 4.0, 5.0])
        rows = sweep_effective_beamwidth(measured, canopy, template, view, None,
                                         thetas, 0.17)
        errors = [r[2] for r in rows]
        assert errors[0] < errors[1] < errors[2]

    def test_bandwidth_direction_canopied(self, view, rng):
        grid_full = FrequencyGrid.linspace(200e6, 900e6, 100)
        grid_top = FrequencyGrid.linspace(800e6, 900e6, 100)
        canopy = corn_canopy(28.0)

        def mc(grid):
            measured, soil = make_measured(grid, 0.18, canopy, view)
            template = SoilDescriptor(soil.permittivity, 0.012)
            errs = []
            for _ in range(10):
                noisy = apply_spectrum_noise(measured, 1.0, rng)
                errs.append(abs(retrieve(noisy, canopy, template, view).vwc.vwc - 0.18))
            return float(np.mean(errs))

        assert mc(grid_full) <= mc(grid_top)

    def test_bandwidth_gap_small_on_bare(self, view, rng):
        grid_full = FrequencyGrid.linspace(200e6, 900e6, 100)
        grid_top = FrequencyGrid.linspace(800e6, 900e6, 100)

        def mc(grid):
            measured, soil = make_measured(grid, 0.18, None, view)
            template = SoilDescriptor(soil.permittivity, 0.012)
            errs = []
            for _ in range(10):
                noisy = apply_spectrum_noise(measured, 1.0, rng)
                errs.append(abs(retrieve(noisy, None, template, view).vwc.vwc - 0.18))
            return float(np.mean(errs))

        assert abs(mc(grid_full) - mc(grid_top)) < 0.005

    def test_bandwidth_rows_and_band_errors(self, grid, view):
        canopy = corn_canopy(28.0)
        measured, soil = make_measured(grid, 0.18, canopy, view)
        template = SoilDescriptor(soil.permittivity, 0.012)
        rows = sweep_bandwidth(measured, canopy, template, view, None,
                               [(200e6, 900e6), (800e6, 900e6)], 0.18)
        assert len(rows) == 2
        assert rows[0][3] <= 0.01
        with pytest.raises(BandError):
            sweep_bandwidth(measured, canopy, template, view, None,
                            [(950e6, 990e6)], 0.18)

    def test_canopy_ablation_rows(self, grid, view):
        canopy = soybean_canopy(35.0, lai=6.0)
        measured, soil = make_measured(grid, 0.2, canopy, view)
        rows = sweep_canopy_ablation(measured, canopy,
                                     SoilDescriptor(soil.permittivity, 0.012),
                                     view, None, 0.2)
        assert rows[0][0] is True and rows[1][0] is False
        assert rows[1][2] >= 2.0 * rows[0][2]

    def test_altitude_sweep_consistency(self, grid, calibration):
        canopy = corn_canopy(28.0)
        soil = soil_from_vwc(0.18, 0.012)
        scans = [simulate_scene_scan(soil, canopy, ViewGeometry(alt))
                 for alt in (6.0, 8.0)]
        rows = sweep_altitude(scans, calibration, canopy,
                              SoilDescriptor(soil.permittivity, 0.012),
                              ViewGeometry(6.0))
        assert abs(rows[0][1] - rows[1][1]) < 0.015
        assert rows[0][0] == pytest.approx(6.0, abs=0.01)
        assert rows[1][0] == pytest.approx(8.0, abs=0.01)

    def test_identical_scans_identical_outputs(self, grid, calibration):
        soil = soil_from_vwc(0.18, 0.012)
        scan = simulate_scene_scan(soil, None, ViewGeometry(6.0))
        rows = sweep_altitude([scan, scan], calibration, None,
                              SoilDescriptor(soil.permittivity, 0.012),
                              ViewGeometry(6.0))
        assert rows[0] == rows[1]

import numpy as np
import pytest

from soilradar import fileio
from soilradar.canopy import OrientationDistribution, orientation_nodes
from soilradar.dsp import AScan
from soilradar.emcore import ComplexPermittivity
from soilradar.errors import FileFormatError, InputError
from soilradar.ground import RcsSpectrum
from soilradar.lidar import CanopyStructureEstimate, PointCloud
from soilradar.simulate import corn_canopy, soybean_canopy


class TestAScanFiles:
    def test_roundtrip_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        scan = AScan(rng.normal(0, 1, 500), 14e9, 6.25, "field-a")
        path = tmp_path / "scan.ascan"
        fileio.write_ascan(path, scan)
        back = fileio.read_ascan(path)
        assert np.array_equal(back.samples, scan.samples)
        assert back.sample_rate == scan.sample_rate
        assert back.altitude_est == scan.altitude_est
        assert back.location == scan.location

    def test_missing_sample_rate(self, tmp_path):
        path = tmp_path / "bad.ascan"
        path.write_text("# altitude_m=6.0\n0.1\n0.2\n")
        with pytest.raises(FileFormatError):
            fileio.read_ascan(path)

    def test_bad_amplitude_names_line(self, tmp_path):
        path = tmp_path / "bad.ascan"
        path.write_text("# sample_rate_hz=14e9\n0.1\nnot-a-number\n")
        with pytest.raises(FileFormatError) as err:
            fileio.read_ascan(path)
        assert err.value.line_no == 3

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            fileio.read_ascan(tmp_path / "nope.ascan")


class TestSpectrumFiles:
    def test_roundtrip(self, tmp_path, grid):
        spectrum = RcsSpectrum(grid, np.linspace(0.1, 2.0, len(grid)))
        path = tmp_path / "scene.rcs"
        fileio.write_rcs_spectrum(path, spectrum, {"range_m": "6.0"})
        back, meta = fileio.read_rcs_spectrum(path)
        assert np.array_equal(back.values, spectrum.values)
        assert np.array_equal(back.grid.frequencies, grid.frequencies)
        assert meta["range_m"] == "6.0"

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.rcs"
        path.write_text("frequency,rcs\n2e8,1.0\n")
        with pytest.raises(FileFormatError) as err:
            fileio.read_rcs_spectrum(path)
        assert err.value.line_no == 1

    def test_wrong_columns(self, tmp_path):
        path = tmp_path / "bad.rcs"
        path.write_text("frequency_hz,rcs_m2\n2e8,1.0,9\n")
        with pytest.raises(FileFormatError) as err:
            fileio.read_rcs_spectrum(path)
        assert err.value.line_no == 2


class TestCalibrationFiles:
    def test_roundtrip(self, tmp_path, calibration):
        path = tmp_path / "cal.cal"
        fileio.write_calibration(path, calibration)
        back = fileio.read_calibration(path)
        assert np.array_equal(back.values, calibration.values)
        assert back.plate_side == calibration.plate_side
        assert back.reference_ranges == calibration.reference_ranges
        assert back.scan_count == calibration.scan_count
        assert back.valid_low_hz == calibration.valid_low_hz
        assert back.valid_high_hz == calibration.valid_high_hz

    def test_missing_provenance(self, tmp_path, grid):
        path = tmp_path / "bad.cal"
        path.write_text("frequency_hz,c_value\n2e8,1.0\n")
        with pytest.raises(FileFormatError):
            fileio.read_calibration(path)


class TestCanopyFiles:
    def test_corn_roundtrip(self, tmp_path):
        canopy = corn_canopy(28.0)
        path = tmp_path / "corn.canopy"
        fileio.write_canopy(path, canopy)
        back = fileio.read_canopy(path)
        assert back.crop_kind == "corn"
        assert back.height == canopy.height
        assert back.stalk_density == canopy.stalk_density
        assert back.leaf_density == canopy.leaf_density
        assert back.corn_leaf_length == canopy.corn_leaf_length
        assert back.leaf_geometry == canopy.leaf_geometry
        assert back.stalk_geometry == canopy.stalk_geometry
        assert back.leaf_orientation.kind == "uniform"

    def test_soybean_roundtrip(self, tmp_path):
        canopy = soybean_canopy(30.0)
        path = tmp_path / "soy.canopy"
        fileio.write_canopy(path, canopy)
        back = fileio.read_canopy(path)
        assert back.stalk_geometry is None
        assert back.crop_kind == "soybean"
        assert back.leaf_geometry == canopy.leaf_geometry

    def test_tabulated_orientation_roundtrip(self, tmp_path):
        psi, delta, w = orientation_nodes()
        dens = np.cos(delta)
        dens = dens / (dens.sum() * w)
        base = soybean_canopy(30.0)
        canopy = type(base)(base.height, 0.0, base.leaf_density, base.leaf_geometry,
                            OrientationDistribution.tabulated(dens), None, "soybean")
        path = tmp_path / "tab.canopy"
        fileio.write_canopy(path, canopy)
        back = fileio.read_canopy(path)
        assert back.leaf_orientation.kind == "tabulated"
        assert np.allclose(back.leaf_orientation.density, dens)

    def test_missing_field(self, tmp_path):
        path = tmp_path / "bad.canopy"
        path.write_text("height = 2.0\n")
        with pytest.raises(FileFormatError):
            fileio.read_canopy(path)


class TestCloudAndAllometry:
    def test_cloud_roundtrip(self, tmp_path):
        rng = np.random.default_rng(1)
        cloud = PointCloud(rng.uniform(0, 10, (200, 3)), tile_id="t1")
        path = tmp_path / "tile.xyz"
        fileio.write_point_cloud(path, cloud)
        back = fileio.read_point_cloud(path)
        assert np.array_equal(back.points, cloud.points)

    def test_cloud_bad_row(self, tmp_path):
        path = tmp_path / "bad.xyz"
        path.write_text("1.0 2.0 0.5\n1.0 2.0\n")
        with pytest.raises(FileFormatError) as err:
            fileio.read_point_cloud(path)
        assert err.value.line_no == 2

    def test_allometry(self, tmp_path):
        path = tmp_path / "allometry.csv"
        path.write_text("crop,leaf_area_m2,leaf_width_m,stalk_radius_m\n"
                        "corn,0.045,0.09,0.015\n"
                        "soybean,0.004,0.05,0.0,0.0002\n")
        table = fileio.read_allometry(path)
        assert table["corn"]["leaf_area"] == 0.045
        assert table["corn"]["leaf_thickness"] == pytest.approx(3e-4)
        assert table["soybean"]["leaf_thickness"] == pytest.approx(2e-4)

    def test_structure_to_descriptor_corn(self):
        estimate = CanopyStructureEstimate(2.0, 8.0, 4.0, 44.4, "corn", 0.76)
        table = {"corn": {"leaf_area": 0.045, "leaf_width": 0.09,
                          "stalk_radius": 0.015, "leaf_thickness": 3e-4}}
        eps = ComplexPermittivity(28.0, 8.4)
        canopy = table and fileio.structure_to_descriptor(estimate, table, eps)
        assert canopy.crop_kind == "corn"
        assert canopy.stalk_density == pytest.approx(4.0)
        assert canopy.leaf_density == pytest.approx(44.4)
        assert canopy.corn_leaf_length == pytest.approx(0.5)
        # concatenated disks preserve the mean single-leaf area
        import math
        n_seg = math.ceil(canopy.corn_leaf_length / (2 * canopy.leaf_geometry.radius))
        assert n_seg == 6

    def test_structure_write(self, tmp_path):
        estimate = CanopyStructureEstimate(0.9, 35.0, 5.0, 1388.9, "soybean", 0.76,
                                           diagnostics={"row_score": 0.91})
        path = tmp_path / "tile.structure"
        fileio.write_structure(path, estimate)
        pairs = fileio.parse_keyvalue(path)
        assert float(pairs["mean_height"]) == 0.9
        assert pairs["crop_kind"] == "soybean"
        assert float(pairs["diagnostics.row_score"]) == 0.91


class TestKeyValue:
    def test_parse_error_names_line(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("a = 1\nnot a pair\n")
        with pytest.raises(FileFormatError) as err:
            fileio.parse_keyvalue(path)
        assert err.value.line_no == 2

    def test_atomic_write_leaves_no_temp(self, tmp_path):
        path = tmp_path / "out" / "file.txt"
        fileio.atomic_write(path, "hello\n")
        assert path.read_text() == "hello\n"
        assert [p.name for p in path.parent.iterdir()] == ["file.txt"]

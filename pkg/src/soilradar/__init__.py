"""Through-canopy soil moisture retrieval from nadir wideband radar.

Forward model (canopy extinction over a coherent rough-surface ground
return), radar A-scan processing with plate-reference calibration, joint
soil-canopy grid-search inversion, LiDAR canopy structure extraction, and a
synthetic scene simulator for end-to-end validation.
"""

from .canopy import (CanopyDescriptor, CylinderGeometry, DiskGeometry,
                     OrientationDistribution, corn_leaf_amplitude,
                     cylinder_forward_amplitude, disk_forward_amplitude,
                     extinction_coefficient, orientation_average_im,
                     transmissivity)
from .dsp import (AScan, CalibrationFactor, ChannelResponse, GatedSegment,
                  channel_response, derive_calibration, isolate_ground_return,
                  measured_rcs, plate_rcs, ricker, synthesize_ascan)
from .emcore import (ComplexPermittivity, FrequencyGrid, SoilMoisture,
                     fresnel_reflectivity, topp_permittivity, topp_vwc,
                     wavenumber)
from .ground import (RcsSpectrum, SoilDescriptor, ViewGeometry, coherent_rcs,
                     effective_area, incoherent_rcs, rcs_vs_incidence, scene_rcs)
from .lidar import (CanopyHeightModel, CanopyStructureEstimate, PointCloud,
                    RowSegmentation, build_chm, canopy_height, detect_rows,
                    estimate_lai, extract_structure, leaf_density,
                    normalize_ground, plant_density_corn, plant_density_soybean)
from .retrieval import (RetrievalResult, SearchConfig, calibrate_roughness,
                        retrieve, sweep_altitude, sweep_bandwidth,
                        sweep_canopy_ablation, sweep_effective_beamwidth)

__version__ = "0.1.0"

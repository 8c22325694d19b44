"""Discrete-scatterer canopy model: forward scattering amplitudes of stalks
and leaves, orientation averaging, volume extinction, and transmissivity.

Stalks are finite dielectric cylinders, leaves thin dielectric disks. At
200-900 MHz both are electrically small in at least one dimension, so the
amplitudes use volume-integral (Rayleigh-Gans) forms with quasistatic
internal fields:

    disk      u = 1 - (e.n)^2 (1 - 1/eps)       tangential E continuous,
                                                 normal E divided by eps
    cylinder  u = 2/(eps + 1)                    transverse internal field of
                                                 the infinite cylinder,
                                                 truncated by length

and the forward amplitude f = k^2 V (eps - 1) u / (4 pi), in meters. In the
exact forward direction the length/area form factor is 1, so tilt enters only
through the polarization coupling u. For any eps with positive imaginary part
Im[f] > 0, which is the sign the optical theorem demands of a forward
amplitude.

Extinction converts to the dimensionless amplitude convention S = k f, for
which kappa_e = (4 pi / k^2) * N * Im[S]; this reduces to the Foldy form
kappa_e = (4 pi / k) * N * Im[f] and keeps kappa_e in Np/m.

A single effective polarization channel is computed, with the electric field
unit vector perpendicular to the plane of incidence (y-axis for incidence in
the x-z plane). With vertical stalks and azimuth-symmetric leaf orientation
statistics the channel choice does not matter at nadir.

Orientation angles: delta is the tilt of the scatterer symmetry axis (cylinder
axis, disk normal) from vertical, psi its azimuth. delta = 0 is a vertical
stalk or a horizontal face-on leaf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .emcore import ComplexPermittivity, wavenumber
from .errors import ApproximationRangeError

# Validity guards for the scattering approximations.
MAX_CYLINDER_KR = 2.0
MAX_DISK_THICKNESS_PHASE = 1.0  # k * thickness * |sqrt(eps)| < 1

# Fixed product quadrature over (psi, delta) for orientation averages.
ORIENTATION_QUADRATURE_N = 32

MAX_INCIDENCE_RAD = math.radians(80.0)

DEFAULT_LEAF_THICKNESS = 3e-4  # m
DEFAULT_CANOPY_LOSS_TANGENT = 0.30


@dataclass(frozen=True)
class CylinderGeometry:
    """Dielectric cylinder: radius and length in m."""

    radius: float
    length: float
    permittivity: ComplexPermittivity

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("cylinder radius must be positive")
        if not self.length > 0:
            raise ValueError("cylinder length must be positive")


@dataclass(frozen=True)
class DiskGeometry:
    """Thin dielectric disk: radius and thickness in m, thickness/radius <= 0.2."""

    radius: float
    thickness: float
    permittivity: ComplexPermittivity

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("disk radius must be positive")
        if not 0 < self.thickness:
            raise ValueError("disk thickness must be positive")
        if self.thickness / self.radius > 0.2:
            raise ValueError("disk must be thin: thickness/radius <= 0.2")


@dataclass(frozen=True, eq=False)
class OrientationDistribution:
    """PDF over scatterer orientation, psi in [0, 2pi) and delta in [0, pi/2].

    kind is one of "uniform", "vertical" (degenerate delta at the vertical
    axis) or "tabulated" (density sampled on the quadrature grid). Tabulated
    densities must integrate to 1 within 1e-3 under the module quadrature.
    """

    kind: str
    density: np.ndarray | None = None  # (n_psi, n_delta) for "tabulated"

    def __post_init__(self):
        if self.kind not in ("uniform", "vertical", "tabulated"):
            raise ValueError(f"unknown orientation kind {self.kind!r}")
        if self.kind == "tabulated":
            if self.density is None:
                raise ValueError("tabulated distribution requires a density array")
            dens = np.asarray(self.density, dtype=float)
            object.__setattr__(self, "density", dens)
            psi, delta, w = orientation_nodes(dens.shape[0], dens.shape[1])
            total = float(np.sum(dens * w))
            if abs(total - 1.0) > 1e-3:
                raise ValueError(f"tabulated density integrates to {total}, not 1")
        elif self.density is not None:
            raise ValueError(f"{self.kind} distribution takes no density array")

    @classmethod
    def uniform(cls) -> "OrientationDistribution":
        return cls("uniform")

    @classmethod
    def vertical(cls) -> "OrientationDistribution":
        return cls("vertical")

    @classmethod
    def tabulated(cls, density: np.ndarray) -> "OrientationDistribution":
        return cls("tabulated", np.asarray(density, dtype=float))


@dataclass(frozen=True, eq=False)
class CanopyDescriptor:
    """Physical canopy parameterization consumed by the forward model.

    Densities are volumetric (per m^3). corn_leaf_length drives the
    disk-concatenation representation of elongated corn leaves and is ignored
    for soybean.
    """

    height: float
    stalk_density: float
    leaf_density: float
    leaf_geometry: DiskGeometry
    leaf_orientation: OrientationDistribution = field(
        default_factory=OrientationDistribution.uniform)
    stalk_geometry: CylinderGeometry | None = None
    crop_kind: str = "soybean"
    corn_leaf_length: float | None = None

    def __post_init__(self):
        if self.height < 0:
            raise ValueError("canopy height must be >= 0")
        if self.stalk_density < 0 or self.leaf_density < 0:
            raise ValueError("densities must be >= 0")
        if self.crop_kind not in ("corn", "soybean"):
            raise ValueError(f"crop kind must be corn or soybean, got {self.crop_kind!r}")
        if self.crop_kind == "corn":
            if self.stalk_geometry is None:
                raise ValueError("corn canopy requires a stalk geometry")
            if self.corn_leaf_length is not None:
                if self.corn_leaf_length < 2.0 * self.leaf_geometry.radius:
                    raise ValueError("corn leaf length must be >= leaf width")

    def with_permittivity(self, eps: ComplexPermittivity) -> "CanopyDescriptor":
        """Copy of this canopy with one shared permittivity for stalks and leaves."""
        leaf = DiskGeometry(self.leaf_geometry.radius, self.leaf_geometry.thickness, eps)
        stalk = None
        if self.stalk_geometry is not None:
            stalk = CylinderGeometry(self.stalk_geometry.radius,
                                     self.stalk_geometry.length, eps)
        return CanopyDescriptor(self.height, self.stalk_density, self.leaf_density,
                                leaf, self.leaf_orientation, stalk,
                                self.crop_kind, self.corn_leaf_length)


def orientation_nodes(n_psi: int = ORIENTATION_QUADRATURE_N,
                      n_delta: int = ORIENTATION_QUADRATURE_N):
    """Midpoint product rule over psi in [0, 2pi) x delta in [0, pi/2].

    Returns (psi, delta) meshes of shape (n_psi, n_delta) and the cell weight
    (a scalar: uniform cells).
    """
    dpsi = 2.0 * np.pi / n_psi
    ddelta = 0.5 * np.pi / n_delta
    psi = (np.arange(n_psi) + 0.5) * dpsi
    delta = (np.arange(n_delta) + 0.5) * ddelta
    psi_m, delta_m = np.meshgrid(psi, delta, indexing="ij")
    return psi_m, delta_m, dpsi * ddelta


def _field_axis_coupling_sq(psi, delta):
    """(e . a)^2 between the field unit vector (y) and the scatterer axis."""
    return (np.sin(delta) * np.sin(psi)) ** 2


def _disk_polarization(eps: complex, coupling_sq):
    """Polarization factor of a thin disk for a given (e . n)^2."""
    return 1.0 - coupling_sq * (1.0 - 1.0 / eps)


def disk_forward_amplitude(geom: DiskGeometry, frequency_hz: float, theta_i: float,
                           orientation: tuple[float, float]) -> complex:
    """Forward scattering amplitude (m) of a thin dielectric disk.

    orientation = (psi, delta) orients the disk normal. The thin-disk internal
    field requires k * thickness * |sqrt(eps)| < 1.
    """
    k = wavenumber(frequency_hz)
    eps = geom.permittivity.as_complex
    phase = k * geom.thickness * abs(np.sqrt(eps))
    if phase >= MAX_DISK_THICKNESS_PHASE:
        raise ApproximationRangeError(
            f"disk too thick for the thin-disk approximation: "
            f"k*t*|sqrt(eps)| = {phase:.3f} >= {MAX_DISK_THICKNESS_PHASE}")
    psi, delta = orientation
    volume = np.pi * geom.radius**2 * geom.thickness
    u = _disk_polarization(eps, _field_axis_coupling_sq(psi, delta))
    return complex(k**2 * volume / (4.0 * np.pi) * (eps - 1.0) * u)


def cylinder_forward_amplitude(geom: CylinderGeometry, frequency_hz: float,
                               theta_i: float) -> complex:
    """Forward scattering amplitude (m) of a vertically oriented finite cylinder.

    Valid for k * radius <= 2. With the field perpendicular to the axis the
    coupling is the transverse quasistatic factor 2/(eps + 1).
    """
    k = wavenumber(frequency_hz)
    if k * geom.radius > MAX_CYLINDER_KR:
        raise ApproximationRangeError(
            f"cylinder electrically too thick: k*r = {k * geom.radius:.3f} > "
            f"{MAX_CYLINDER_KR}")
    eps = geom.permittivity.as_complex
    volume = np.pi * geom.radius**2 * geom.length
    u = 2.0 / (eps + 1.0)
    return complex(k**2 * volume / (4.0 * np.pi) * (eps - 1.0) * u)


def corn_leaf_amplitude(leaf_length: float, leaf_width: float,
                        permittivity: ComplexPermittivity, frequency_hz: float,
                        theta_i: float, orientation: tuple[float, float],
                        thickness: float = DEFAULT_LEAF_THICKNESS) -> complex:
    """Forward amplitude (m) of an elongated corn leaf.

    The leaf is a coplanar concatenation of ceil(length/width) disks with
    diameters equal to the leaf width; in the forward direction the segments
    add coherently with zero relative phase, which preserves the overall
    length and aspect ratio of the leaf.
    """
    if leaf_length < leaf_width:
        raise ValueError("leaf length must be >= leaf width")
    n_segments = math.ceil(leaf_length / leaf_width)
    disk = DiskGeometry(leaf_width / 2.0, thickness, permittivity)
    return n_segments * disk_forward_amplitude(disk, frequency_hz, theta_i, orientation)


def orientation_average_im(amplitude_fn, dist: OrientationDistribution,
                           n_psi: int = ORIENTATION_QUADRATURE_N,
                           n_delta: int = ORIENTATION_QUADRATURE_N) -> float:
    """Average Im[S] over scatterer orientations against the distribution pdf.

    amplitude_fn maps an (psi, delta) tuple to a complex amplitude. The
    degenerate vertical distribution is evaluated directly; the others use the
    fixed midpoint product quadrature (n overridable for refinement tests).
    """
    if dist.kind == "vertical":
        return float(np.imag(amplitude_fn((0.0, 0.0))))
    psi, delta, w = orientation_nodes(n_psi, n_delta)
    if dist.kind == "uniform":
        pdf = np.full(psi.shape, 1.0 / (np.pi**2))
    else:
        if dist.density.shape != psi.shape:
            raise ValueError(
                f"tabulated density shape {dist.density.shape} does not match "
                f"quadrature grid {psi.shape}")
        pdf = dist.density
    values = np.empty(psi.shape)
    for idx in np.ndindex(psi.shape):
        values[idx] = np.imag(amplitude_fn((psi[idx], delta[idx])))
    return float(np.sum(values * pdf) * w)


def _mean_axis_coupling_sq(dist: OrientationDistribution,
                           n_psi: int = ORIENTATION_QUADRATURE_N,
                           n_delta: int = ORIENTATION_QUADRATURE_N) -> float:
    """Orientation moment <(e . n)^2> under the distribution.

    The disk amplitude is affine in (e . n)^2, so averaging the amplitude is
    identical to evaluating it at this moment; the retrieval's vectorized
    forward tables rely on that.
    """
    if dist.kind == "vertical":
        return 0.0
    psi, delta, w = orientation_nodes(n_psi, n_delta)
    coupling = _field_axis_coupling_sq(psi, delta)
    if dist.kind == "uniform":
        pdf = np.full(psi.shape, 1.0 / (np.pi**2))
    else:
        pdf = dist.density
    return float(np.sum(coupling * pdf) * w)


def _leaf_unit(canopy: CanopyDescriptor):
    """(effective volume, amplitude function factory) of one leaf scatterer."""
    geom = canopy.leaf_geometry
    if canopy.crop_kind == "corn" and canopy.corn_leaf_length is not None:
        width = 2.0 * geom.radius
        n_segments = math.ceil(canopy.corn_leaf_length / width)
    else:
        n_segments = 1
    volume = n_segments * np.pi * geom.radius**2 * geom.thickness
    return n_segments, volume


def extinction_coefficient(canopy: CanopyDescriptor, frequency_hz: float) -> float:
    """Volume extinction coefficient kappa_e of the canopy in Np/m.

    kappa_e = (4 pi / k^2) (N_s Im<S_s> + N_l Im<S_l>) with the dimensionless
    amplitudes S = k f; stalks are vertical, leaves averaged over their
    orientation distribution.
    """
    k = wavenumber(frequency_hz)
    total = 0.0
    if canopy.stalk_density > 0 and canopy.stalk_geometry is not None:
        im_s = np.imag(cylinder_forward_amplitude(canopy.stalk_geometry,
                                                  frequency_hz, 0.0))
        total += canopy.stalk_density * k * im_s
    if canopy.leaf_density > 0:
        n_segments, _ = _leaf_unit(canopy)
        geom = canopy.leaf_geometry

        def leaf_amp(orientation):
            return n_segments * disk_forward_amplitude(geom, frequency_hz, 0.0,
                                                       orientation)

        im_l = orientation_average_im(leaf_amp, canopy.leaf_orientation)
        total += canopy.leaf_density * k * im_l
    return float(4.0 * np.pi / k**2 * total)


def transmissivity(canopy: CanopyDescriptor, frequency_hz: float,
                   theta_i: float) -> float:
    """One-way canopy transmissivity exp(-kappa_e h / cos theta_i).

    Callers square it for two-way power. Rejects grazing geometry
    (theta_i >= 80 deg) where the slab path-length model breaks down.
    """
    if not 0.0 <= theta_i < MAX_INCIDENCE_RAD:
        raise ValueError(f"incidence angle {theta_i} rad outside [0, 80 deg)")
    if canopy.height == 0.0 or (canopy.stalk_density == 0.0 and
                                canopy.leaf_density == 0.0):
        return 1.0
    kappa = extinction_coefficient(canopy, frequency_hz)
    return float(np.exp(-kappa * canopy.height / np.cos(theta_i)))

"""Time-domain radar processing: Ricker waveform, synthetic A-scans,
ground-return gating, frequency-response extraction, and plate calibration.

An A-scan is a real-valued time trace sampled at ~14 GS/s; the ground echo
sits at delay 2R/c. Gating finds the dominant envelope peak inside an
altitude-guided search interval, cuts a window of twice the pulse duration
around it, and the windowed segment is transformed to the channel response
G(f). Calibration against a metal plate of known analytical RCS removes
waveform shaping and hardware gain:

    C(f)       = f^2 r_r^4 |G_r(f)|^2 / sigma_r(f)
    sigma_m(f) = f^2 R^4  |G(f)|^2  / C(f)

so any constant bookkeeping factor in the radar equation cancels between the
two. The range R entering these expressions is derived from the gated peak
time (R = c t_peak / 2, sub-sample interpolated); the altitude estimate in
the scan metadata only centers the search interval and may be off by 10 cm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import hilbert
from scipy.signal.windows import tukey

from .emcore import SPEED_OF_LIGHT, FrequencyGrid
from .errors import BandError, GatingError
from .ground import RcsSpectrum

DEFAULT_SAMPLE_RATE = 14e9  # S/s
DEFAULT_CENTER_FREQUENCY = 550e6  # Hz, band center of 200-900 MHz

# Gate covers the Ricker main lobe and first side lobes: 2 * (1.5 / f_c).
GATE_HALF_DURATION_PERIODS = 1.5
# Search interval half-width in range; generous against the +-10 cm altitude
# tolerance while excluding the direct-coupling pulse.
SEARCH_HALF_WIDTH_M = 0.5
# Peak must clear the trace noise floor by this factor.
PEAK_FLOOR_RATIO = 3.0
# Fraction of the peak reference spectrum below which calibration is invalid.
VALID_BAND_FRACTION = 0.05
# Raised-cosine taper over the outer 10% of the gate (Tukey alpha = 0.2).
GATE_TAPER_ALPHA = 0.2


@dataclass(frozen=True, eq=False)
class AScan:
    """One time-domain radar trace with platform metadata."""

    samples: np.ndarray
    sample_rate: float = DEFAULT_SAMPLE_RATE
    altitude_est: float | None = None  # m, +-0.1 m tolerance semantics
    location: str = ""

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        object.__setattr__(self, "samples", samples)
        if samples.size == 0:
            raise ValueError("A-scan must contain samples")
        if not self.sample_rate > 0:
            raise ValueError("sample rate must be positive")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True, eq=False)
class GatedSegment:
    """Windowed ground-return segment cut from a parent scan."""

    samples: np.ndarray
    sample_rate: float
    gate_start: float  # s, relative to the parent scan origin
    gate_length: float  # s
    peak_time: float  # s, sub-sample interpolated envelope peak

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))
        if not self.gate_start <= self.peak_time <= self.gate_start + self.gate_length:
            raise ValueError("peak time must lie inside the gate")

    @property
    def peak_range(self) -> float:
        """Two-way range implied by the peak time, in m."""
        return SPEED_OF_LIGHT * self.peak_time / 2.0


@dataclass(frozen=True, eq=False)
class ChannelResponse:
    """Complex reflection spectrum G(f) of a gated segment."""

    grid: FrequencyGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        object.__setattr__(self, "values", vals)
        if vals.shape != (len(self.grid),):
            raise ValueError("response length must match the grid")


@dataclass(frozen=True, eq=False)
class CalibrationFactor:
    """Frequency-dependent calibration curve C(f) with provenance."""

    grid: FrequencyGrid
    values: np.ndarray
    plate_side: float
    reference_ranges: tuple
    scan_count: int
    valid_low_hz: float
    valid_high_hz: float

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "reference_ranges",
                           tuple(float(r) for r in self.reference_ranges))
        if vals.shape != (len(self.grid),):
            raise ValueError("calibration length must match the grid")
        mask = self.valid_mask()
        if not np.all(vals[mask] > 0):
            raise ValueError("calibration must be positive on the valid sub-band")

    def valid_mask(self) -> np.ndarray:
        f = self.grid.frequencies
        return (f >= self.valid_low_hz) & (f <= self.valid_high_hz)


def ricker(center_f: float, t) -> np.ndarray | float:
    """Ricker wavelet r(t) = (1 - 2 pi^2 f_c^2 t^2) exp(-pi^2 f_c^2 t^2).

    Unit peak at t = 0, zero crossings at +-1/(pi f_c sqrt(2)), magnitude
    spectrum peaked at f_c.
    """
    if not center_f > 0:
        raise ValueError("center frequency must be positive")
    arg = (np.pi * center_f * np.asarray(t, dtype=float)) ** 2
    out = (1.0 - 2.0 * arg) * np.exp(-arg)
    return float(out) if np.isscalar(t) else out


def ricker_spectrum(center_f: float, frequency_hz) -> np.ndarray | float:
    """Continuous Fourier magnitude of the Ricker: 2 f^2/(sqrt(pi) f_c^3) e^(-f^2/f_c^2)."""
    f = np.asarray(frequency_hz, dtype=float)
    out = 2.0 * f**2 / (math.sqrt(math.pi) * center_f**3) * np.exp(-(f / center_f) ** 2)
    return float(out) if np.isscalar(frequency_hz) else out


def gate_length_s(center_f: float = DEFAULT_CENTER_FREQUENCY) -> float:
    """Gate window length: twice the pulse duration, 2 * (1.5 / f_c)."""
    return 2.0 * GATE_HALF_DURATION_PERIODS / center_f


def synthesize_ascan(echoes, noise_level: float = 0.0,
                     sample_rate: float = DEFAULT_SAMPLE_RATE,
                     duration: float = 200e-9,
                     center_f: float = DEFAULT_CENTER_FREQUENCY,
                     rng: np.random.Generator | None = None,
                     altitude_est: float | None = None,
                     location: str = "") -> AScan:
    """Superpose delayed, scaled, optionally spectrum-shaped Ricker pulses.

    Each echo is (delay_s, gain) or (delay_s, gain, shaping) where shaping is
    a callable mapping a frequency array (Hz) to a complex amplitude factor
    applied on top of the Ricker spectrum. Synthesis happens on the one-sided
    FFT axis, so delays need not be sample-aligned; they must leave room for
    the pulse tail before the end of the record. White Gaussian noise of RMS
    noise_level is added per sample.
    """
    n = int(round(duration * sample_rate))
    if n < 2:
        raise ValueError("duration too short for the sample rate")
    freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
    spectrum = np.zeros(freqs.size, dtype=complex)
    base = ricker_spectrum(center_f, freqs)
    for echo in echoes:
        if len(echo) == 2:
            delay, gain = echo
            shaping = None
        else:
            delay, gain, shaping = echo
        if not 0.0 <= delay < duration:
            raise ValueError(f"echo delay {delay} outside the record duration")
        contrib = gain * base * np.exp(-2j * np.pi * freqs * delay)
        if shaping is not None:
            contrib = contrib * shaping(freqs)
        spectrum += contrib
    samples = np.fft.irfft(spectrum * sample_rate, n=n)
    if noise_level > 0.0:
        if rng is None:
            rng = np.random.default_rng()
        samples = samples + rng.normal(0.0, noise_level, n)
    return AScan(samples, sample_rate, altitude_est, location)


def _parabolic_peak(env: np.ndarray, idx: int) -> float:
    """Sub-sample peak position by a 3-point parabola on the envelope."""
    if idx <= 0 or idx >= env.size - 1:
        return float(idx)
    a, b, c = env[idx - 1], env[idx], env[idx + 1]
    denom = a - 2.0 * b + c
    if denom == 0.0:
        return float(idx)
    return float(idx + 0.5 * (a - c) / denom)


def isolate_ground_return(scan: AScan,
                          center_f: float = DEFAULT_CENTER_FREQUENCY,
                          taper: bool = True) -> GatedSegment:
    """Locate the ground echo and cut a window of twice the pulse duration.

    The search interval is [2(R - 0.5)/c, 2(R + 0.5)/c] around the altitude
    estimate; within it the dominant peak of the analytic-signal envelope is
    taken as the ground return. Raises GatingError when no peak clears three
    times the trace noise floor (median envelope).
    """
    if scan.altitude_est is None:
        raise ValueError("scan has no altitude estimate to center the gate search")
    fs = scan.sample_rate
    env = np.abs(hilbert(scan.samples))
    t_lo = 2.0 * (scan.altitude_est - SEARCH_HALF_WIDTH_M) / SPEED_OF_LIGHT
    t_hi = 2.0 * (scan.altitude_est + SEARCH_HALF_WIDTH_M) / SPEED_OF_LIGHT
    i_lo = max(0, int(math.floor(t_lo * fs)))
    i_hi = min(scan.samples.size, int(math.ceil(t_hi * fs)) + 1)
    if i_lo >= i_hi:
        raise GatingError("altitude search interval lies outside the record")
    window = env[i_lo:i_hi]
    peak_rel = int(np.argmax(window))
    peak_idx = i_lo + peak_rel
    floor = float(np.median(env))
    if window[peak_rel] <= 0.0 or window[peak_rel] < PEAK_FLOOR_RATIO * floor:
        raise GatingError(
            f"no ground return: peak {window[peak_rel]:.3g} below "
            f"{PEAK_FLOOR_RATIO}x noise floor {floor:.3g}")
    peak_time = _parabolic_peak(env, peak_idx) / fs
    length = gate_length_s(center_f)
    half = int(round(length * fs / 2.0))
    start = peak_idx - half
    stop = peak_idx + half
    if start < 0 or stop > scan.samples.size:
        raise GatingError("gate window extends beyond the record")
    segment = scan.samples[start:stop].copy()
    if taper:
        segment = segment * tukey(segment.size, alpha=GATE_TAPER_ALPHA)
    return GatedSegment(segment, fs, start / fs, segment.size / fs, peak_time)


def channel_response(segment: GatedSegment, grid: FrequencyGrid) -> ChannelResponse:
    """Discrete Fourier transform of the gated segment at the grid frequencies.

    Phase is referenced to the gate start; scaling by the sample period makes
    the result approximate the continuous-time transform. Grid frequencies
    must respect Nyquist.
    """
    fs = segment.sample_rate
    f = grid.frequencies
    if f[-1] >= fs / 2.0:
        raise BandError(f"grid exceeds Nyquist ({fs / 2.0:.3g} Hz)")
    n = np.arange(segment.samples.size)
    kernel = np.exp(-2j * np.pi * np.outer(f, n) / fs)
    values = kernel @ segment.samples / fs
    return ChannelResponse(grid, values)


def plate_rcs(side: float, frequency_hz) -> float | np.ndarray:
    """Broadside RCS of a square PEC plate: sigma = 4 pi l^4 / lambda^2."""
    if not side > 0:
        raise ValueError("plate side must be positive")
    f = np.asarray(frequency_hz, dtype=float)
    out = 4.0 * np.pi * side**4 * f**2 / SPEED_OF_LIGHT**2
    return float(out) if np.isscalar(frequency_hz) else out


def derive_calibration(plate_scans, plate_side: float, grid: FrequencyGrid,
                       center_f: float = DEFAULT_CENTER_FREQUENCY,
                       taper: bool = True) -> CalibrationFactor:
    """Estimate C(f) from reference plate scans at known ranges.

    Per scan, C_i(f) = f^2 r_i^4 |G_i(f)|^2 / sigma_r(f) with r_i from the
    gated peak; the per-scan curves are averaged. The valid sub-band is the
    contiguous run around the spectral peak where the mean |G_r| exceeds 5%
    of its maximum.
    """
    if len(plate_scans) == 0:
        raise ValueError("at least one plate scan is required")
    f = grid.frequencies
    sigma_ref = plate_rcs(plate_side, f)
    curves = []
    mags = []
    ranges = []
    for scan in plate_scans:
        segment = isolate_ground_return(scan, center_f, taper)
        resp = channel_response(segment, grid)
        r = segment.peak_range
        ranges.append(r)
        mag = np.abs(resp.values)
        mags.append(mag)
        curves.append(f**2 * r**4 * mag**2 / sigma_ref)
    mean_c = np.mean(curves, axis=0)
    mean_mag = np.mean(mags, axis=0)
    above = mean_mag >= VALID_BAND_FRACTION * float(np.max(mean_mag))
    peak = int(np.argmax(mean_mag))
    lo = peak
    while lo > 0 and above[lo - 1]:
        lo -= 1
    hi = peak
    while hi < above.size - 1 and above[hi + 1]:
        hi += 1
    return CalibrationFactor(grid, mean_c, plate_side, tuple(ranges),
                             len(plate_scans), float(f[lo]), float(f[hi]))


def measured_rcs(resp: ChannelResponse, range_m: float,
                 cal: CalibrationFactor) -> RcsSpectrum:
    """Calibrated RCS spectrum sigma_m(f) = f^2 R^4 |G(f)|^2 / C(f).

    The response grid must equal the calibration grid and lie inside the
    calibrated valid sub-band.
    """
    if not np.array_equal(resp.grid.frequencies, cal.grid.frequencies):
        raise BandError("response and calibration grids differ")
    mask = cal.valid_mask()
    if not np.all(mask):
        bad = resp.grid.frequencies[~mask]
        raise BandError(
            f"{bad.size} grid frequencies outside the calibrated valid band "
            f"[{cal.valid_low_hz:.3g}, {cal.valid_high_hz:.3g}] Hz")
    f = resp.grid.frequencies
    values = f**2 * range_m**4 * np.abs(resp.values) ** 2 / cal.values
    return RcsSpectrum(resp.grid, values)

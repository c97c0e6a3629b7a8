"""Second-derivative Gaussian transmit pulse and its autocorrelation.

All times are in nanoseconds, frequencies in GHz.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

DEFAULT_DURATION = 0.5  # ns
DEFAULT_BANDWIDTH_10DB = 5.6  # GHz
# lag-table resolution relative to the pulse sample grid
DEFAULT_OVERSAMPLE = 8


def _doublet(t, shape_parameter):
    x2 = (np.asarray(t, dtype=float) / shape_parameter) ** 2
    return (1.0 - 4.0 * np.pi * x2) * np.exp(-2.0 * np.pi * x2)


def _grid_count(duration, sample_period):
    ratio = duration / sample_period
    n = int(round(ratio))
    if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, ratio):
        raise ValueError(
            f"sample_period={sample_period} does not divide duration={duration}"
        )
    return n


@dataclass(frozen=True)
class PulseShape:
    """Unit-energy doublet sampled on a closed grid over [-T_m/2, T_m/2]."""

    shape_parameter: float
    duration: float
    sample_period: float
    samples: np.ndarray = field(repr=False)
    scale: float = field(repr=False)

    @property
    def t(self) -> np.ndarray:
        n = len(self.samples) - 1
        return (np.arange(n + 1) - n / 2) * self.sample_period

    @property
    def energy(self) -> float:
        return float(np.sum(self.samples**2) * self.sample_period)

    def waveform(self, t):
        """Evaluate the normalized, truncated pulse at arbitrary times."""
        t = np.asarray(t, dtype=float)
        inside = np.abs(t) <= self.duration / 2
        return np.where(inside, self.scale * _doublet(t, self.shape_parameter), 0.0)

    def to_csv(self, path) -> None:
        _write_grid(path, self.t, self.samples)


def make_gaussian_doublet(
    shape_parameter: float,
    duration: float = DEFAULT_DURATION,
    sample_period: float | None = None,
) -> PulseShape:
    """Truncate p(t) ~ (1 - 4 pi (t/tp)^2) exp(-2 pi (t/tp)^2) and renormalize.

    ``sample_period`` defaults to ``duration / 64``.
    """
    if shape_parameter <= 0 or duration <= 0:
        raise ValueError("shape_parameter and duration must be positive")
    if sample_period is None:
        sample_period = duration / 64
    if sample_period <= 0:
        raise ValueError("sample_period must be positive")
    if sample_period > duration / 32 * (1 + 1e-12):
        raise ValueError("sample_period must be at most duration/32")
    n = _grid_count(duration, sample_period)
    t = (np.arange(n + 1) - n / 2) * sample_period
    raw = _doublet(t, shape_parameter)
    # exact symmetry: mirror the left half onto the right
    raw = 0.5 * (raw + raw[::-1])
    scale = 1.0 / np.sqrt(np.sum(raw**2) * sample_period)
    samples = raw * scale
    samples.setflags(write=False)
    return PulseShape(shape_parameter, duration, sample_period, samples, scale)


@dataclass(frozen=True)
class AutocorrelationTable:
    """R(tau) tabulated on [-T_m, T_m], linearly interpolated, zero outside."""

    lags: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    duration: float

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        out = np.interp(tau, self.lags, self.values, left=0.0, right=0.0)
        return np.where(np.abs(tau) >= self.duration, 0.0, out)

    def to_csv(self, path) -> None:
        _write_grid(path, self.lags, self.values)

    def smooth(self) -> "SmoothAutocorrelation":
        """Cubic-spline view of the same table, for adaptive quadrature."""
        return SmoothAutocorrelation(self)


class SmoothAutocorrelation:
    def __init__(self, table: AutocorrelationTable):
        self.duration = table.duration
        self._spline = CubicSpline(table.lags, table.values)

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        return np.where(np.abs(tau) >= self.duration, 0.0, self._spline(tau))


def autocorrelation(p: PulseShape, oversample: int = DEFAULT_OVERSAMPLE) -> AutocorrelationTable:
    """Discrete autocorrelation of the truncated pulse.

    The pulse is re-evaluated on a grid ``oversample`` times finer than its
    own before correlating, so linear interpolation of the table stays well
    below 1e-4 of R(0) at off-grid lags.
    """
    if oversample < 1:
        raise ValueError("oversample must be >= 1")
    if oversample == 1:
        dt, x = p.sample_period, np.asarray(p.samples)
    else:
        dt = p.sample_period / oversample
        n = (len(p.samples) - 1) * oversample
        t = (np.arange(n + 1) - n / 2) * dt
        x = p.waveform(t)
        x = 0.5 * (x + x[::-1])
    x = x / np.sqrt(np.sum(x**2) * dt)
    r = np.correlate(x, x, mode="full") * dt
    r = 0.5 * (r + r[::-1])
    m = len(x) - 1
    lags = np.arange(-m, m + 1) * dt
    r[np.abs(lags) >= p.duration * (1 - 1e-12)] = 0.0
    r[m] = 1.0
    r.setflags(write=False)
    lags.setflags(write=False)
    return AutocorrelationTable(lags, r, p.duration)


class DoubletAutocorrelation:
    """Closed-form R(tau) of the untruncated doublet.

    R(tau) = (1 - 4 pi x^2 + (4/3) pi^2 x^4) exp(-pi x^2), x = tau / tp.
    Its support is unbounded; ``duration`` only records the nominal T_m.
    """

    def __init__(self, shape_parameter: float, duration: float = DEFAULT_DURATION):
        self.shape_parameter = shape_parameter
        self.duration = duration

    def __call__(self, tau):
        x2 = (np.asarray(tau, dtype=float) / self.shape_parameter) ** 2
        return (1.0 - 4.0 * np.pi * x2 + (4.0 / 3.0) * np.pi**2 * x2**2) * np.exp(-np.pi * x2)


def bandwidth_10db(p: PulseShape, zero_pad: int = 64) -> float:
    """Width (GHz) of the band within 10 dB of the spectral peak."""
    if zero_pad < 16:
        raise ValueError("zero_pad must be at least 16")
    nfft = zero_pad * len(p.samples)
    spec = np.abs(np.fft.rfft(p.samples, nfft)) ** 2
    f = np.fft.rfftfreq(nfft, d=p.sample_period)
    k = int(np.argmax(spec))
    level = spec[k] / 10.0
    above = spec >= level

    lo = k
    while lo > 0 and above[lo - 1]:
        lo -= 1
    hi = k
    while hi < len(spec) - 1 and above[hi + 1]:
        hi += 1

    def edge(i_in, i_out):
        # linear interpolation of the -10 dB crossing between two bins
        s0, s1 = spec[i_in], spec[i_out]
        return f[i_in] + (f[i_out] - f[i_in]) * (s0 - level) / (s0 - s1)

    f_lo = edge(lo, lo - 1) if lo > 0 else f[0]
    f_hi = edge(hi, hi + 1) if hi < len(spec) - 1 else f[-1]
    return float(f_hi - f_lo)


def calibrate_shape_parameter(
    bandwidth: float = DEFAULT_BANDWIDTH_10DB,
    duration: float = DEFAULT_DURATION,
    sample_period: float | None = None,
) -> float:
    """Shape parameter whose truncated doublet has the requested 10 dB bandwidth."""

    def mismatch(tp):
        return bandwidth_10db(make_gaussian_doublet(tp, duration, sample_period)) - bandwidth

    return float(brentq(mismatch, 0.05 * duration, 2.0 * duration, xtol=1e-10))


@lru_cache(maxsize=None)
def default_pulse(duration: float = DEFAULT_DURATION, bandwidth: float = DEFAULT_BANDWIDTH_10DB) -> PulseShape:
    tp = calibrate_shape_parameter(bandwidth, duration)
    return make_gaussian_doublet(tp, duration)


def _write_grid(path, t, values):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_ns", "value"])
        for ti, vi in zip(t, values):
            w.writerow([f"{ti:.9g}", f"{vi:.12g}"])

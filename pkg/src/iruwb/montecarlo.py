"""Monte Carlo BER estimation over random channels, bits, codes and noise.

Trials are produced in fixed-size batches. Batch ``b`` of user ``n`` draws
from ``SeedSequence(seed, spawn_key=(b, n))`` and its noise from
``spawn_key=(b, NOISE_KEY)``, so results depend only on the seed and the
batch size, never on how many workers computed them or on the Eb/N0 point
(the same channels are reused along a curve).
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import binomtest

from .analysis import QuadratureSpec, analyze, eb_and_noise, interference_terms
from .channel import ChannelParams
from .modem import SystemParams, simulate_trial

NOISE_KEY = 1 << 20
ENGINES = ("simulation", "analysis")


@dataclass(frozen=True)
class StopRule:
    min_errors: int = 100
    max_trials: int = 10**7
    min_trials: int = 10**4
    batch_size: int = 2000

    def __post_init__(self):
        if self.min_errors < 0 or self.min_trials < 0:
            raise ValueError("min_errors and min_trials must be >= 0")
        if self.max_trials < 1 or self.batch_size < 1:
            raise ValueError("max_trials and batch_size must be >= 1")


@dataclass(frozen=True)
class BerPoint:
    ebn0_dB: float
    trials: int
    errors: int
    ber: float
    ci_low: float
    ci_high: float
    engine: str
    capped: bool = False

    def row(self) -> dict:
        return {
            "engine": self.engine,
            "ebn0_db": self.ebn0_dB,
            "trials": self.trials,
            "errors": self.errors,
            "ber": self.ber,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
        }


def wilson_interval(errors: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    ci = binomtest(errors, trials).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def _stream(seed: int, batch: int, role: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(batch, role)))


@dataclass(frozen=True)
class Batch:
    """Noise-free decision components for one batch of trials (unit E_p scaling applied)."""

    bits: np.ndarray
    z_u: np.ndarray
    z_iasi: np.ndarray
    z_isi: np.ndarray
    z_mui: np.ndarray
    noise: np.ndarray  # standard normal draws

    def decide(self, sigma_n: float, toggles: dict) -> np.ndarray:
        z = self.z_u + sigma_n * self.noise
        if toggles.get("iasi", True):
            z = z + self.z_iasi
        if toggles.get("isi", True):
            z = z + self.z_isi
        if toggles.get("mui", True):
            z = z + self.z_mui
        return np.where(z >= 0, 1, -1)


def simulate_batch(chan: ChannelParams, sys: SystemParams, R, seed: int, batch: int, size: int) -> Batch:
    rngs = [_stream(seed, batch, n) for n in range(sys.N_u + 1)]
    out = np.empty((5, size))
    for i in range(size):
        bit, d = simulate_trial(chan, sys, R, rngs)
        out[:, i] = (bit, d.Z_u, d.Z_iasi, d.Z_isi, d.Z_mui)
    noise = _stream(seed, batch, NOISE_KEY).standard_normal(size)
    return Batch(out[0].astype(int), out[1], out[2], out[3], out[4], noise)


def _simulate_batch_args(args):
    return simulate_batch(*args)


class TrialSource:
    """Lazily computed, cached batches for one (channel, system, pulse, seed) setup."""

    def __init__(self, chan: ChannelParams, sys: SystemParams, R, seed: int, batch_size: int = 2000, workers: int = 1):
        self.chan, self.sys, self.R = chan, sys, R
        self.seed, self.batch_size, self.workers = seed, batch_size, workers
        self._batches: list[Batch] = []

    def get(self, index: int) -> Batch:
        while len(self._batches) <= index:
            start = len(self._batches)
            n_new = max(1, self.workers)
            args = [(self.chan, self.sys, self.R, self.seed, b, self.batch_size) for b in range(start, start + n_new)]
            if self.workers > 1:
                with ProcessPoolExecutor(self.workers) as ex:
                    self._batches.extend(ex.map(_simulate_batch_args, args))
            else:
                self._batches.extend(_simulate_batch_args(a) for a in args)
        return self._batches[index]


def noise_sigma(chan: ChannelParams, sys: SystemParams, ebn0_dB: float) -> float:
    """Noise standard deviation that puts the desired-ray energy at ``ebn0_dB``."""
    return math.sqrt(eb_and_noise(chan, sys, ebn0_dB)[1])


def run_ber_point(
    sys: SystemParams,
    chan: ChannelParams,
    R,
    ebn0_dB: float,
    stop_rule: StopRule = StopRule(),
    seed: int = 0,
    toggles: dict | None = None,
    source: TrialSource | None = None,
    noise: bool = True,
) -> BerPoint:
    """Simulated BER at one Eb/N0; stops on ``stop_rule`` at batch granularity."""
    if not math.isfinite(ebn0_dB):
        raise ValueError("ebn0_dB must be finite")
    toggles = {"iasi": True, "isi": True, "mui": True, **(toggles or {})}
    if source is None:
        source = TrialSource(chan, sys, R, seed, stop_rule.batch_size)
    sigma = noise_sigma(chan, sys, ebn0_dB) if noise else 0.0
    trials = errors = b = 0
    while True:
        batch = source.get(b)
        b += 1
        take = min(len(batch.bits), stop_rule.max_trials - trials)
        dec = batch.decide(sigma, toggles)[:take]
        errors += int(np.count_nonzero(dec != batch.bits[:take]))
        trials += take
        if trials >= stop_rule.max_trials:
            break
        if trials >= stop_rule.min_trials and errors >= stop_rule.min_errors:
            break
    lo, hi = wilson_interval(errors, trials)
    return BerPoint(float(ebn0_dB), trials, errors, errors / trials, lo, hi, "simulation",
                    capped=errors < stop_rule.min_errors)


def analysis_point(
    sys: SystemParams,
    chan: ChannelParams,
    R,
    ebn0_dB: float,
    quad: QuadratureSpec = QuadratureSpec(),
    toggles: dict | None = None,
    terms=None,
    reading: str = "s_Tf",
) -> tuple[BerPoint, object]:
    a = analyze(chan, sys, R, ebn0_dB, quad, toggles, terms, reading)
    return BerPoint(float(ebn0_dB), 0, 0, a.ber, a.ber, a.ber, "analysis"), a


def run_curve(
    chan: ChannelParams,
    sys: SystemParams,
    R_sim,
    R_analysis,
    ebn0_grid,
    engines=ENGINES,
    stop_rule: StopRule = StopRule(),
    seed: int = 0,
    toggles: dict | None = None,
    quad: QuadratureSpec = QuadratureSpec(),
    reading: str = "s_Tf",
    workers: int = 1,
    terms=None,
):
    """BER points for each engine across ``ebn0_grid``.

    Returns ``(points, breakdown)``; ``breakdown`` holds the analysis
    :class:`LinkAnalysis` per grid value (empty without the analysis engine).
    """
    grid = [float(x) for x in ebn0_grid]
    if not grid:
        raise ValueError("ebn0 grid must be nonempty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("ebn0 grid must be strictly ascending")
    engines = list(engines)
    if not engines:
        raise ValueError("at least one engine is required")
    unknown = set(engines) - set(ENGINES)
    if unknown:
        raise ValueError(f"unknown engines {sorted(unknown)}")

    points, breakdown = [], []
    if "simulation" in engines:
        src = TrialSource(chan, sys, R_sim, seed, stop_rule.batch_size, workers)
        for e in grid:
            points.append(run_ber_point(sys, chan, R_sim, e, stop_rule, seed, toggles, source=src))
    if "analysis" in engines:
        if terms is None:
            terms = interference_terms(chan, sys, R_analysis, quad, reading)
        for e in grid:
            pt, a = analysis_point(sys, chan, R_analysis, e, quad, toggles, terms, reading)
            points.append(pt)
            breakdown.append(a)
    return points, breakdown


def point_dict(p: BerPoint) -> dict:
    return asdict(p)


def dump_components(chan: ChannelParams, sys: SystemParams, R, seed: int, n: int, path) -> None:
    """Write the first ``n`` trials of batch 0 as JSON lines (noise-free components)."""
    import json

    rngs = [_stream(seed, 0, u) for u in range(sys.N_u + 1)]
    with open(path, "w") as fh:
        for i in range(n):
            bit, d = simulate_trial(chan, sys, R, rngs)
            rec = {"trial": i, "bit": int(bit), "Z_u": d.Z_u, "Z_iasi": d.Z_iasi, "Z_isi": d.Z_isi, "Z_mui": d.Z_mui}
            fh.write(json.dumps(rec) + "\n")

"""IEEE 802.15.4a indoor-office LOS channel: sampling and arrival statistics.

Times are in ns, rates in 1/ns. Default parameters not fixed by the link
analysis (everything except ``Lambda`` and ``lambda2``) are external defaults
transcribed from the 802.15.4a channel-model final report, office LOS (CM3).
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import gammaln, xlogy

RAY_MODELS = ("single_poisson", "mixture_poisson")
CHANNEL_KINDS = ("ieee802154a", "single_tap")
DESIRED_RAY_MODES = ("fixed", "faded")


@dataclass(frozen=True)
class ChannelParams:
    Lambda: float = 0.016  # cluster arrival rate
    lambda1: float = 0.19  # external default
    lambda2: float = 2.97
    beta: float = 0.0184  # external default
    Gamma: float = 14.6  # inter-cluster decay, external default
    gamma0: float = 6.4  # intra-cluster decay base, external default
    k_gamma: float = 0.0  # external default
    M_cluster_dB: float = 3.0  # cluster shadowing std, external default
    m_mu: float = 0.42  # mean of ln(m), external default
    m_sigma: float = 0.31  # std of ln(m), external default
    kappa: float = 0.03  # external default
    C0: float = 1.0
    omega0: float = 2 * math.pi * 5.0  # rad/ns, 5 GHz reference
    omega_c: float = 2 * math.pi * 6.85  # rad/ns, center of 3.1-10.6 GHz
    tau_max: float = 200.0
    ray_model: str = "mixture_poisson"
    kind: str = "ieee802154a"
    # "fixed": the desired ray (1,1) carries exactly its mean power, +1 polarity
    desired_ray: str = "fixed"

    def __post_init__(self):
        for name in ("Lambda", "lambda2", "Gamma", "gamma0", "tau_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.lambda1 < 0:
            raise ValueError("lambda1 must be non-negative")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if self.lambda1 > 0 and not self.lambda2 > self.lambda1:
            raise ValueError("lambda2 must exceed lambda1")
        if self.M_cluster_dB < 0 or self.m_sigma < 0:
            raise ValueError("standard deviations must be non-negative")
        if self.ray_model not in RAY_MODELS:
            raise ValueError(f"ray_model must be one of {RAY_MODELS}")
        if self.kind not in CHANNEL_KINDS:
            raise ValueError(f"kind must be one of {CHANNEL_KINDS}")
        if self.desired_ray not in DESIRED_RAY_MODES:
            raise ValueError(f"desired_ray must be one of {DESIRED_RAY_MODES}")

    def frequency_scale(self) -> float:
        """F(omega) = C0 (omega/omega0)^-kappa evaluated at the reference frequency."""
        return self.C0 * (self.omega0 / self.omega0) ** (-self.kappa)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ChannelRealization:
    """One sampled impulse response; taps ordered by cluster, then ray."""

    cluster: np.ndarray = field(repr=False)
    ray: np.ndarray = field(repr=False)
    delay: np.ndarray = field(repr=False)
    amplitude: np.ndarray = field(repr=False)
    cluster_arrivals: np.ndarray = field(repr=False)
    cluster_gammas: np.ndarray = field(repr=False)
    cluster_energies: np.ndarray = field(repr=False)
    frequency_scale: float = 1.0

    def __len__(self):
        return len(self.delay)

    def sorted_taps(self):
        """(delays, amplitudes, is_first) sorted by absolute delay."""
        order = np.argsort(self.delay, kind="stable")
        first = (self.cluster[order] == 1) & (self.ray[order] == 1)
        return self.delay[order], self.amplitude[order], first

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["l", "k", "delay_ns", "amplitude"])
            for row in zip(self.cluster, self.ray, self.delay, self.amplitude):
                w.writerow([int(row[0]), int(row[1]), repr(float(row[2])), repr(float(row[3]))])

    @classmethod
    def from_csv(cls, path, frequency_scale: float = 1.0) -> "ChannelRealization":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return from_taps(
            [int(r["l"]) for r in rows],
            [int(r["k"]) for r in rows],
            [float(r["delay_ns"]) for r in rows],
            [float(r["amplitude"]) for r in rows],
            frequency_scale=frequency_scale,
        )


def from_taps(cluster, ray, delay, amplitude, frequency_scale: float = 1.0) -> ChannelRealization:
    """Build a realization from explicit taps (used for hand-made test channels)."""
    cluster = np.asarray(cluster, dtype=int)
    ray = np.asarray(ray, dtype=int)
    delay = np.asarray(delay, dtype=float)
    amplitude = np.asarray(amplitude, dtype=float)
    if not len(cluster) == len(ray) == len(delay) == len(amplitude):
        raise ValueError("cluster, ray, delay and amplitude must have equal length")
    first = (cluster == 1) & (ray == 1)
    if first.sum() != 1 or delay[first][0] != 0.0:
        raise ValueError("exactly one tap (l=1, k=1) at delay 0 is required")
    n_clusters = int(cluster.max()) if len(cluster) else 0
    arrivals = np.array([delay[cluster == l].min() for l in range(1, n_clusters + 1)])
    return ChannelRealization(
        cluster,
        ray,
        delay,
        amplitude,
        arrivals,
        np.full(n_clusters, np.nan),
        np.full(n_clusters, np.nan),
        frequency_scale,
    )


def _poisson_points(rng, horizon, draw_gaps, mean_gap):
    """Arrival times 0 = t_1 < t_2 < ... <= horizon from i.i.d. gaps."""
    chunk = int(horizon / mean_gap * 1.2) + 16
    out = [np.zeros(1)]
    last = 0.0
    while True:
        t = last + np.cumsum(draw_gaps(chunk))
        keep = t[t <= horizon]
        out.append(keep)
        if len(keep) < chunk:
            break
        last = t[-1]
    return np.concatenate(out)


def sample_cluster_arrivals(params: ChannelParams, rng: np.random.Generator) -> np.ndarray:
    """T_1 = 0 followed by Exp(Lambda) gaps, truncated at tau_max."""
    return _poisson_points(
        rng, params.tau_max, lambda n: rng.exponential(1.0 / params.Lambda, n), 1.0 / params.Lambda
    )


def sample_ray_arrivals(params: ChannelParams, cluster_window: float, rng: np.random.Generator) -> np.ndarray:
    """tau_1 = 0 followed by gaps from the configured ray model, truncated at ``cluster_window``."""
    if cluster_window <= 0:
        raise ValueError("cluster_window must be positive")
    return _poisson_points(rng, cluster_window, lambda n: _ray_gaps(params, rng, n), _mean_ray_gap(params))


def gamma_l(params: ChannelParams, T_l):
    """Intra-cluster decay constant, linear in the cluster arrival time."""
    return params.k_gamma * np.asarray(T_l, dtype=float) + params.gamma0


def cluster_energy(params: ChannelParams, T_l, rng: np.random.Generator | None = None):
    """Omega_l = exp(-T_l/Gamma) with lognormal shadowing of M_cluster_dB (one draw per cluster)."""
    T_l = np.asarray(T_l, dtype=float)
    level_db = 10 * np.log10(np.exp(-T_l / params.Gamma))
    if rng is not None and params.M_cluster_dB > 0:
        level_db = level_db + rng.normal(0.0, params.M_cluster_dB, T_l.shape)
    return 10 ** (level_db / 10)


def ray_normalizer(params: ChannelParams) -> float:
    # (1 - beta) lambda1 + beta lambda2 + 1, as the mean-power law writes it
    return (1 - params.beta) * params.lambda1 + params.beta * params.lambda2 + 1


def ray_mean_power(params: ChannelParams, Omega_l, gamma, tau):
    """E[alpha_{k,l}^2] for a ray at relative delay ``tau`` in a cluster of energy ``Omega_l``."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma <= 0):
        raise ValueError("gamma must be positive")
    return Omega_l * np.exp(-np.asarray(tau) / gamma) / (gamma * ray_normalizer(params))


def desired_ray_power(params: ChannelParams) -> float:
    """Mean power of tap (1,1), i.e. Omega_0; 1 for the single-tap channel."""
    if params.kind == "single_tap":
        return 1.0
    return float(ray_mean_power(params, 1.0, params.gamma0, 0.0))


def sample_nakagami(m, Omega, rng: np.random.Generator, size=None):
    """Nakagami-m amplitudes: alpha^2 ~ Gamma(shape=m, scale=Omega/m)."""
    m = np.asarray(m, dtype=float)
    Omega = np.asarray(Omega, dtype=float)
    if np.any(m < 0.5):
        raise ValueError("Nakagami m must be >= 0.5")
    if np.any(Omega <= 0):
        raise ValueError("Omega must be positive")
    return np.sqrt(rng.gamma(m, Omega / m, size))


def sample_m_factor(params: ChannelParams, rng: np.random.Generator, size):
    m = rng.lognormal(params.m_mu, params.m_sigma, size)
    return np.maximum(m, 0.5)


def _ray_gaps(params: ChannelParams, rng: np.random.Generator, n: int) -> np.ndarray:
    if params.ray_model == "single_poisson" or params.beta == 0.0:
        return rng.exponential(1.0 / params.lambda2, n)
    if params.beta == 1.0:
        return rng.exponential(1.0 / params.lambda1, n)
    slow = rng.random(n) < params.beta
    return rng.exponential(1.0, n) / np.where(slow, params.lambda1, params.lambda2)


def _mean_ray_gap(params: ChannelParams) -> float:
    if params.ray_model == "single_poisson" or params.beta == 0.0:
        return 1.0 / params.lambda2
    if params.beta == 1.0:
        return 1.0 / params.lambda1
    return params.beta / params.lambda1 + (1 - params.beta) / params.lambda2


def _all_ray_arrivals(params, windows, rng):
    """Relative ray delays for every cluster from one pooled gap draw."""
    mean_gap = _mean_ray_gap(params)
    counts = (windows / mean_gap * 1.2).astype(int) + 16
    pool = _ray_gaps(params, rng, int(counts.sum()))
    out, start = [], 0
    for W, n in zip(windows, counts):
        if W <= 0:
            out.append(np.zeros(1))
            continue
        tau = np.cumsum(pool[start:start + n])
        start += n
        while tau[-1] <= W:
            tau = np.concatenate([tau, tau[-1] + np.cumsum(_ray_gaps(params, rng, n))])
        out.append(np.concatenate([[0.0], tau[: np.searchsorted(tau, W, side="right")]]))
    return out


def generate_realization(
    params: ChannelParams, rng: np.random.Generator, windows=None
) -> ChannelRealization:
    """Draw one impulse response (the desired tap (1,1) always sits at delay 0).

    ``windows`` is an optional sequence of (lo, hi) absolute-delay intervals;
    when given, taps outside them (other than tap (1,1)) are dropped before
    fading is drawn. The kept taps have the same joint statistics as in a
    full draw, but the random stream is consumed differently.
    """
    fscale = params.frequency_scale()
    if params.kind == "single_tap":
        one = np.ones(1)
        return ChannelRealization(
            np.ones(1, dtype=int), np.ones(1, dtype=int), np.zeros(1), one.copy(),
            np.zeros(1), np.full(1, params.gamma0), one.copy(), fscale,
        )

    T = sample_cluster_arrivals(params, rng)
    gammas = gamma_l(params, T)
    # cluster 1 is the energy reference; shadowing applies to later clusters
    energies = np.ones_like(T)
    if len(T) > 1:
        energies[1:] = cluster_energy(params, T[1:], rng)

    horizon = params.tau_max
    if windows is not None:
        horizon = min(horizon, max((hi for _, hi in windows), default=0.0))
    taus = _all_ray_arrivals(params, np.maximum(horizon - T, 0.0), rng)
    sizes = np.array([len(t) for t in taus])
    cluster = np.repeat(np.arange(1, len(T) + 1), sizes)
    ray = np.concatenate([np.arange(1, n + 1) for n in sizes])
    tau = np.concatenate(taus)
    delay = np.repeat(T, sizes) + tau

    if windows is not None:
        keep = np.zeros(len(delay), dtype=bool)
        keep[0] = True
        for lo, hi in windows:
            keep |= (delay >= lo) & (delay <= hi)
        cluster, ray, delay, tau = cluster[keep], ray[keep], delay[keep], tau[keep]

    g = gammas[cluster - 1]
    power = energies[cluster - 1] * np.exp(-tau / g) / (g * ray_normalizer(params))

    n = len(power)
    m = sample_m_factor(params, rng, n)
    amp = np.sqrt(rng.gamma(m, power / m))
    amp *= np.where(rng.random(n) < 0.5, -1.0, 1.0)
    if params.desired_ray == "fixed":
        amp[0] = math.sqrt(power[0])
    else:
        amp[0] = abs(amp[0])
    # Gamma draws can underflow to exactly zero for tiny m*power
    amp[amp == 0.0] = np.finfo(float).tiny
    return ChannelRealization(cluster, ray, delay, amp, T, gammas, energies, fscale)


def pdf_cluster_delay(params: ChannelParams, l: int, x):
    """Erlang(l-1, Lambda) density of the delay of cluster ``l`` relative to cluster 1."""
    if l < 2:
        raise ValueError("cluster index must be >= 2")
    return _erlang_pdf(l - 1, params.Lambda, x)


def pdf_ray_delay(params: ChannelParams, k: int, x):
    """Erlang(k-1, lambda2) density of the delay of ray ``k`` relative to ray 1."""
    if k < 2:
        raise ValueError("ray index must be >= 2")
    return _erlang_pdf(k - 1, params.lambda2, x)


def _erlang_pdf(n, rate, x):
    x = np.asarray(x, dtype=float)
    xs = np.maximum(x, 0.0)
    log_pdf = math.log(rate) - rate * xs + xlogy(n - 1, rate * xs) - gammaln(n)
    return np.where(x < 0, 0.0, np.exp(log_pdf))


def pdf_code_interval(T_s: float, x):
    """Uniform density of the hop-code interval on [-T_s, T_s]."""
    if T_s <= 0:
        raise ValueError("T_s must be positive")
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) <= T_s, 1.0 / (2 * T_s), 0.0)


def mean_ray_interval(params: ChannelParams) -> float:
    return 1.0 / params.lambda2


def mean_cluster_interval(params: ChannelParams) -> float:
    return 1.0 / params.Lambda


def estimate_intra_cluster_decay(
    params: ChannelParams, n_channels: int, rng: np.random.Generator, span: float | None = None
) -> float:
    """Fit gamma from the mean ray power of cluster 1 versus excess delay.

    Bins the second moment of every ray after the first and regresses its
    logarithm on the bin center.
    """
    if params.kind == "single_tap":
        raise ValueError("single_tap channels have no intra-cluster decay")
    if span is None:
        span = 3.0 * params.gamma0
    edges = np.linspace(0.0, span, 31)
    power = np.zeros(len(edges) - 1)
    count = np.zeros(len(edges) - 1)
    for _ in range(n_channels):
        ch = generate_realization(params, rng)
        sel = (ch.cluster == 1) & (ch.ray > 1) & (ch.delay < span)
        idx = np.searchsorted(edges, ch.delay[sel], side="right") - 1
        np.add.at(power, idx, ch.amplitude[sel] ** 2)
        np.add.at(count, idx, 1)
    ok = count > 0
    centers = 0.5 * (edges[1:] + edges[:-1])
    slope = np.polyfit(centers[ok], np.log(power[ok] / count[ok]), 1, w=np.sqrt(count[ok]))[0]
    return float(-1.0 / slope)

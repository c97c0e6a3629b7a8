"""Independent reference computations used to cross-check the fast engines.

* ``waveform_decision_statistic`` synthesizes r(t) and v(t) on a fine time
  grid and integrates their product numerically.
* ``mc_*`` estimate each analytical interference term by Monte Carlo
  sampling of the same integrand.
"""
from __future__ import annotations

import math

import numpy as np

from .analysis import _erlang_cap, _smooth, omega0
from .channel import ChannelParams, ChannelRealization
from .modem import DecisionComponents, SystemParams, Transmission, template_times
from .pulse import PulseShape


def waveform_decision_statistic(
    pulse: PulseShape,
    channels: list[ChannelRealization],
    transmissions: list[Transmission],
    sys: SystemParams,
    dt: float | None = None,
    noise: float = 0.0,
) -> DecisionComponents:
    """Correlator output from sampled waveforms (no use of R)."""
    if dt is None:
        dt = pulse.sample_period / 64
    T_m = pulse.duration
    templates = template_times(sys, transmissions[0])
    n = int(round(T_m / dt))
    grid = (np.arange(n + 1) - n / 2) * dt
    w = np.full(n + 1, dt)
    w[0] = w[-1] = dt / 2
    v = pulse.waveform(grid)
    amp = math.sqrt(sys.E_p)

    parts = {"u": 0.0, "iasi": 0.0, "isi": 0.0, "mui": 0.0}
    for user, (ch, tx) in enumerate(zip(channels, transmissions)):
        gain = amp * math.sqrt(ch.frequency_scale)
        first = (ch.cluster == 1) & (ch.ray == 1)
        for j, tj in enumerate(templates):
            t = tj + grid
            r = {"u": np.zeros_like(t), "iasi": np.zeros_like(t), "isi": np.zeros_like(t), "mui": np.zeros_like(t)}
            for q, tq, b in zip(tx.pulse_index, tx.times(sys), tx.bits):
                arrive = tq + ch.delay
                near = np.abs(arrive - tj) < T_m
                for a, alpha, is_first in zip(arrive[near], ch.amplitude[near], first[near]):
                    s = b * gain * alpha * pulse.waveform(t - a)
                    if user > 0:
                        r["mui"] += s
                    elif q == j:
                        r["u" if is_first else "iasi"] += s
                    else:
                        r["isi"] += s
            for key in parts:
                parts[key] += float(np.sum(r[key] * v * w))
    return DecisionComponents(parts["u"], noise, parts["iasi"], parts["isi"], parts["mui"])


def mc_sigma_iasi2(chan: ChannelParams, sys: SystemParams, R, n: int, rng: np.random.Generator) -> float:
    """Sample ray delays y ~ Erlang(k-1, lambda2), stratified over k."""
    if chan.kind == "single_tap":
        return 0.0
    R = _smooth(R)
    T_m = R.duration
    ks = np.arange(2, _erlang_cap(chan.lambda2, T_m) + 1)
    per = max(1, n // len(ks))
    total = 0.0
    for k in ks:
        y = rng.gamma(k - 1, 1.0 / chan.lambda2, per)
        val = np.exp(-y / chan.gamma0) * R(y) ** 2 * (y < T_m)
        total += val.mean()
    F = chan.frequency_scale()
    return F * sys.E_p * sys.N_s**2 * omega0(chan) * total


def mc_mui_kernel(chan: ChannelParams, sys: SystemParams, R, n: int, rng: np.random.Generator) -> float:
    """Sample y ~ Erlang(k-1, lambda2) per k and the lag u = y + z uniformly on [0, T_m]."""
    if chan.kind == "single_tap":
        return 0.0
    R = _smooth(R)
    T_m = R.duration
    ks = np.arange(2, _erlang_cap(chan.lambda2, T_m + sys.T_f / 2) + 1)
    per = max(1, n // len(ks))
    total = 0.0
    for k in ks:
        y = rng.gamma(k - 1, 1.0 / chan.lambda2, per)
        u = rng.uniform(0.0, T_m, per)
        z = u - y
        inside = (z >= -sys.T_f / 2) & (z <= sys.T_f / 2)
        total += T_m * np.mean(np.exp(-y / chan.gamma0) * R(u) ** 2 * inside)
    return total


def mc_sigma_mui2(
    chan: ChannelParams, sys: SystemParams, R, n: int, rng: np.random.Generator, omega_sum: float = 0.0
) -> float:
    if sys.N_u == 0:
        return 0.0
    F = chan.frequency_scale()
    kernel = mc_mui_kernel(chan, sys, R, n, rng)
    return F * sys.E_p * sys.R_b * sys.N_s**2 * sys.N_u * (omega0(chan) + omega_sum) * kernel


def mc_omega_sigma(
    chan: ChannelParams, sys: SystemParams, n: int, rng: np.random.Generator, reading: str = "s_Tf"
) -> float:
    """Sample tau_code, T_l and T_{l+1} for every (s, l) stratum.

    T_l is drawn by importance sampling T_l = x - E with E exponential at the
    rate at which the ray energy decays backwards from x; T_{l+1} is drawn
    from its own Erlang density.
    """
    if chan.kind == "single_tap":
        return 0.0
    n_pulses = sys.n_interfering_frames(chan.tau_max) * sys.N_s - 1
    if n_pulses <= 0:
        return 0.0
    step = sys.T_f if reading == "s_Tf" else sys.T_s
    Ts, Lam, tmax = sys.T_s, chan.Lambda, chan.tau_max
    W0 = omega0(chan)
    c = 1.0 / chan.gamma0 - 1.0 / chan.Gamma
    if c <= 0:
        c = 1.0 / chan.gamma0
    L = _erlang_cap(Lam, tmax)
    per = max(1, n // (n_pulses * L))

    def log_erlang(order, x):
        x = np.maximum(x, 1e-300)
        return math.log(Lam) - Lam * x + (order - 1) * np.log(Lam * x) - math.lgamma(order)

    total = 0.0
    for s in range(1, n_pulses + 1):
        for l in range(1, L + 1):
            x = s * step + rng.uniform(-Ts, Ts, per)
            T_next = rng.gamma(l, 1.0 / Lam, per)
            beyond = (T_next > x) & (T_next <= tmax)
            if l == 1:
                val = np.exp(-x / chan.gamma0) * beyond
            else:
                E = rng.exponential(1.0 / c, per)
                T = x - E
                ok = (T > 0) & beyond
                g = chan.k_gamma * np.maximum(T, 0.0) + chan.gamma0
                log_w = -T / chan.Gamma - E / g + log_erlang(l - 1, T) - (math.log(c) - c * E)
                val = np.where(ok, np.exp(np.where(ok, log_w, 0.0)), 0.0)
            total += W0 * val.mean()
    return total

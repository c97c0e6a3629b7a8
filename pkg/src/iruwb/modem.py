"""Time-hopped BPSK transmission and the single-finger correlation receiver.

The receiver output is evaluated in the tap domain: every (template pulse,
transmitted pulse, channel tap) triple contributes ``b * sqrt(E_p F) * alpha *
R(offset)``, which is exact for a linear channel and a pulse-train template.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelParams, ChannelRealization, generate_realization


@dataclass(frozen=True)
class SystemParams:
    """Link parameters. Times in ns, ``R_b`` in bits/ns (1 Mbps = 1e-3)."""

    N_s: int = 1
    R_b: float = 15e-3
    N_h: int = 16
    T_c: float = 0.5
    N_u: int = 0
    E_p: float = 1.0
    N0: float = 0.0
    T_f: float | None = None
    user_delays: tuple | None = None

    def __post_init__(self):
        if self.N_s < 1 or self.N_h < 1:
            raise ValueError("N_s and N_h must be >= 1")
        if self.R_b <= 0 or self.T_c <= 0:
            raise ValueError("R_b and T_c must be positive")
        if self.N_u < 0:
            raise ValueError("N_u must be >= 0")
        if self.E_p <= 0 or self.N0 < 0:
            raise ValueError("E_p must be positive and N0 non-negative")
        derived = 1.0 / (self.R_b * self.N_s)
        if self.T_f is None:
            object.__setattr__(self, "T_f", derived)
        elif abs(self.T_f * self.R_b * self.N_s - 1.0) > 1e-9:
            raise ValueError("T_f must equal 1/(R_b N_s)")
        if self.T_s > self.T_f * (1 + 1e-12):
            raise ValueError(
                f"T_s <= T_f violated: N_h*T_c = {self.T_s:g} ns exceeds T_f = {self.T_f:g} ns"
            )
        if self.user_delays is not None and len(self.user_delays) != self.N_u:
            raise ValueError("user_delays must list one delay per interfering user")

    @classmethod
    def from_mbps(cls, bit_rate_mbps: float, **kw) -> "SystemParams":
        return cls(R_b=bit_rate_mbps * 1e-3, **kw)

    @property
    def T_s(self) -> float:
        return self.N_h * self.T_c

    @property
    def bit_rate_mbps(self) -> float:
        return self.R_b * 1e3

    def n_interfering_frames(self, tau_max: float) -> int:
        """N_I = ceil(tau_max / T_f)."""
        return max(0, math.ceil(tau_max / self.T_f - 1e-9))


def gen_th_sequence(N_h: int, length: int, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. hop indices uniform on {1, ..., N_h}."""
    if N_h < 1:
        raise ValueError("N_h must be >= 1")
    return rng.integers(1, N_h + 1, size=length)


@dataclass(frozen=True)
class Transmission:
    """Pulses of one user that can reach the current symbol's templates.

    ``pulse_index`` q counts frames relative to the current symbol (q = 0 is
    its first pulse); pulse q is sent at ``delay + q T_f + code_q T_c``.
    """

    pulse_index: np.ndarray
    bits: np.ndarray
    codes: np.ndarray
    delay: float = 0.0

    def times(self, sys: SystemParams) -> np.ndarray:
        return self.delay + self.pulse_index * sys.T_f + self.codes * sys.T_c


@dataclass(frozen=True)
class DecisionComponents:
    Z_u: float
    Z_n: float
    Z_iasi: float
    Z_isi: float
    Z_mui: float
    Z_total: float = field(init=False)
    bit_estimate: int = field(init=False)

    def __post_init__(self):
        total = self.Z_u + self.Z_n + self.Z_iasi + self.Z_isi + self.Z_mui
        object.__setattr__(self, "Z_total", total)
        # Z_total == 0 decides +1
        object.__setattr__(self, "bit_estimate", 1 if total >= 0 else -1)


ALL_ON = {"iasi": True, "isi": True, "mui": True}


def template_times(sys: SystemParams, desired: Transmission) -> np.ndarray:
    """Template pulse positions, locked to tap (1,1) of the desired user."""
    q = desired.pulse_index
    own = (q >= 0) & (q < sys.N_s)
    order = np.argsort(q[own])
    return desired.times(sys)[own][order]


def correlation_windows(sys: SystemParams, tx: Transmission, templates, T_m: float):
    """Absolute-delay intervals in which a tap of ``tx`` overlaps some template."""
    t = tx.times(sys)
    return [(tj - ti - T_m, tj - ti + T_m) for tj in templates for ti in t]


def _check_history(sys: SystemParams, desired: Transmission, tau_max: float | None):
    if tau_max is None:
        return
    need = sys.n_interfering_frames(tau_max) * sys.N_s
    q = set(int(v) for v in desired.pulse_index)
    missing = [s for s in range(-need, 0) if s not in q]
    if missing:
        raise ValueError(f"desired user needs {need} prior pulses; missing q={missing[:5]}")
    if any(j not in q for j in range(sys.N_s)):
        raise ValueError("desired user must carry all N_s pulses of the current symbol")


def decision_statistic(
    channels: list[ChannelRealization],
    transmissions: list[Transmission],
    R,
    sys: SystemParams,
    noise: float | None = None,
    rng: np.random.Generator | None = None,
    toggles: dict | None = None,
    tau_max: float | None = None,
) -> DecisionComponents:
    """Correlator output for the current symbol of user 0.

    ``channels[n]`` and ``transmissions[n]`` belong to user n (0 = desired).
    Noise is taken from ``noise`` if given, else drawn from ``rng`` with
    variance F N_s N0 / 2, else zero. Components switched off in ``toggles``
    are zeroed before the decision. When ``tau_max`` is given the desired
    user's history is checked to hold N_I N_s prior pulses.
    """
    if len(channels) != len(transmissions):
        raise ValueError("need one channel per transmission")
    _check_history(sys, transmissions[0], tau_max)
    toggles = {**ALL_ON, **(toggles or {})}
    T_m = R.duration
    templates = template_times(sys, transmissions[0])
    amp = math.sqrt(sys.E_p)

    # gather every (tap, pulse, template) overlap, then evaluate R once
    lags, coefs, kinds = [], [], []
    fscale = channels[0].frequency_scale
    for user, (ch, tx) in enumerate(zip(channels, transmissions)):
        delays, alphas, first = ch.sorted_taps()
        gain = amp * math.sqrt(ch.frequency_scale)
        times = tx.times(sys)
        off = (templates[:, None] - times[None, :]).ravel()
        lo = np.searchsorted(delays, off - T_m, side="right")
        hi = np.searchsorted(delays, off + T_m, side="left")
        for flat in np.flatnonzero(hi > lo):
            j, p = divmod(int(flat), len(times))
            sl = slice(lo[flat], hi[flat])
            lags.append(delays[sl] - off[flat])
            coefs.append(tx.bits[p] * gain * alphas[sl])
            if user > 0:
                kinds.append(np.full(hi[flat] - lo[flat], 3))
            elif tx.pulse_index[p] == j:
                kinds.append(np.where(first[sl], 0, 1))
            else:
                kinds.append(np.full(hi[flat] - lo[flat], 2))

    z_u = z_iasi = z_isi = z_mui = 0.0
    if lags:
        c = np.concatenate(coefs) * R(np.concatenate(lags))
        z_u, z_iasi, z_isi, z_mui = np.bincount(np.concatenate(kinds), weights=c, minlength=4)

    if noise is None:
        noise = 0.0
        if rng is not None and sys.N0 > 0:
            noise = rng.normal(0.0, math.sqrt(fscale * sys.N_s * sys.N0 / 2))
    return DecisionComponents(
        float(z_u),
        float(noise),
        float(z_iasi) if toggles["iasi"] else 0.0,
        float(z_isi) if toggles["isi"] else 0.0,
        float(z_mui) if toggles["mui"] else 0.0,
    )


def draw_desired(sys: SystemParams, tau_max: float, rng: np.random.Generator, bit: int | None = None) -> Transmission:
    """Current symbol plus N_I N_s history pulses for user 0."""
    history = sys.n_interfering_frames(tau_max) * sys.N_s
    q = np.arange(-history, sys.N_s)
    symbols = np.floor_divide(q, sys.N_s)
    sym_bits = np.where(rng.random(symbols.max() - symbols.min() + 1) < 0.5, -1, 1)
    bits = sym_bits[symbols - symbols.min()]
    if bit is not None:
        bits[symbols == 0] = bit
    codes = gen_th_sequence(sys.N_h, len(q), rng)
    return Transmission(q, bits, codes, 0.0)


def draw_interferer(sys: SystemParams, tau_max: float, rng: np.random.Generator, delay: float | None = None) -> Transmission:
    """An asynchronous user with delay uniform on [-T_f/2, T_f/2]."""
    if delay is None:
        delay = rng.uniform(-sys.T_f / 2, sys.T_f / 2)
    history = sys.n_interfering_frames(tau_max) * sys.N_s
    q = np.arange(-history - 1, sys.N_s + 1)
    symbols = np.floor_divide(q, sys.N_s)
    sym_bits = np.where(rng.random(symbols.max() - symbols.min() + 1) < 0.5, -1, 1)
    bits = sym_bits[symbols - symbols.min()]
    codes = gen_th_sequence(sys.N_h, len(q), rng)
    return Transmission(q, bits, codes, float(delay))


def simulate_trial(
    chan: ChannelParams,
    sys: SystemParams,
    R,
    user_rngs: list[np.random.Generator],
    noise: float = 0.0,
    toggles: dict | None = None,
) -> tuple[int, DecisionComponents]:
    """One symbol decision over fresh channels. Returns (sent bit, components).

    ``user_rngs[n]`` drives user n's bits, codes, delay and channel.
    """
    if len(user_rngs) != sys.N_u + 1:
        raise ValueError("need one random stream per user")
    T_m = R.duration
    rng0 = user_rngs[0]
    bit = 1 if rng0.random() < 0.5 else -1
    txs = [draw_desired(sys, chan.tau_max, rng0, bit)]
    for n, r in enumerate(user_rngs[1:]):
        delay = sys.user_delays[n] if sys.user_delays is not None else None
        txs.append(draw_interferer(sys, chan.tau_max, r, delay))
    templates = template_times(sys, txs[0])
    channels = [
        generate_realization(chan, r, windows=correlation_windows(sys, tx, templates, T_m))
        for tx, r in zip(txs, user_rngs)
    ]
    return bit, decision_statistic(channels, txs, R, sys, noise=noise, toggles=toggles)

"""Closed-form link evaluation: interference variances, SINR and BPSK BER.

Every variance is an expectation over the single-Poisson ray process
(rate ``lambda2``) written as a series over the ray index k of integrals
against the Erlang ray-delay density; the series and the integrals are
evaluated numerically with the tolerances in :class:`QuadratureSpec`.
Energies are reported in units of the per-pulse energy E_p.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import erfc, gammainc

from .channel import (
    ChannelParams,
    desired_ray_power,
    gamma_l,
)
from .modem import SystemParams


class QuadratureError(RuntimeError):
    pass


class SeriesError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    relative_tolerance: float = 1e-8
    absolute_tolerance: float = 1e-12
    max_subdivisions: int = 500
    series_rel_cutoff: float = 1e-6

    def __post_init__(self):
        if self.relative_tolerance <= 0 or self.absolute_tolerance <= 0:
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")
        if not 0 < self.series_rel_cutoff < 1:
            raise ValueError("series_rel_cutoff must lie in (0, 1)")


@dataclass(frozen=True)
class LinkAnalysis:
    E_b: float
    sigma_n2: float
    sigma_iasi2: float
    sigma_isi2: float
    omega_sigma: float
    sigma_mui2: float
    sinr: float
    ber: float


def _quad(f, a, b, quad: QuadratureSpec, what: str, points=None) -> float:
    if b <= a:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        res = integrate.quad(
            f, a, b,
            epsabs=quad.absolute_tolerance,
            epsrel=quad.relative_tolerance,
            limit=quad.max_subdivisions,
            points=points,
            full_output=1,
        )
    val, err, info = res[0], res[1], res[2]
    if len(res) > 3:
        # scipy flags trouble; accept it only if the error estimate still meets tolerance
        tol = max(quad.absolute_tolerance, quad.relative_tolerance * abs(val))
        if not np.isfinite(val) or err > 10 * tol:
            raise QuadratureError(f"{what}: quad did not converge ({res[3].splitlines()[0]}, err={err:.3g})")
    return float(val)


def _series(term, start: int, mode: float, cap: int, cutoff: float, what: str) -> float:
    """Sum term(start), term(start+1), ... until a term past the mode is negligible."""
    total = 0.0
    for idx in range(start, cap + 1):
        t = term(idx)
        total += t
        if idx > mode and abs(t) <= cutoff * abs(total):
            return total
        if idx > mode and total == 0.0 and t == 0.0:
            return 0.0
    raise SeriesError(f"{what}: series not converged at cap {cap} (last term {t:.3g}, sum {total:.3g})")


def _smooth(R):
    return R.smooth() if hasattr(R, "smooth") else R


def _erlang_pdf(n: int, rate: float, y: float) -> float:
    if y <= 0.0:
        return rate if (n == 1 and y == 0.0) else 0.0
    return math.exp(math.log(rate) - rate * y + (n - 1) * math.log(rate * y) - math.lgamma(n))


def _erlang_cap(rate: float, span: float) -> int:
    # ray index cap: mean count over the span plus 20 standard deviations
    mean = rate * span
    return int(math.ceil(mean + 20.0 * math.sqrt(mean) + 20.0)) + 1


def omega0(chan: ChannelParams) -> float:
    """Mean energy of the desired ray, 1 / (gamma0 [(1-beta) lambda1 + beta lambda2 + 1])."""
    return desired_ray_power(chan)


def ray_kernel(chan: ChannelParams, R, quad: QuadratureSpec, lo: float, hi: float) -> float:
    """sum_{k>=2} int_lo^hi exp(-y/gamma0) f_p(y; k) R(y)^2 dy, f_p zero for y < 0."""
    if chan.kind == "single_tap":
        return 0.0
    lo = max(lo, 0.0)
    if hi <= lo:
        return 0.0
    g, rate, R = chan.gamma0, chan.lambda2, _smooth(R)

    def term(k):
        return _quad(
            lambda y: math.exp(-y / g) * _erlang_pdf(k - 1, rate, y) * float(R(y)) ** 2,
            lo, hi, quad, f"ray kernel k={k}",
        )

    return _series(term, 2, 1 + chan.lambda2 * hi, _erlang_cap(chan.lambda2, hi), quad.series_rel_cutoff, "ray kernel")


def sigma_iasi2(chan: ChannelParams, sys: SystemParams, R, quad: QuadratureSpec = QuadratureSpec()) -> float:
    F = chan.frequency_scale()
    return F * sys.E_p * sys.N_s**2 * omega0(chan) * ray_kernel(chan, R, quad, 0.0, R.duration)


def omega_sigma(
    chan: ChannelParams,
    sys: SystemParams,
    quad: QuadratureSpec = QuadratureSpec(),
    reading: str = "s_Tf",
) -> float:
    """Mean first-ray energy left over from the N_I N_s - 1 interfering pulses.

    Pulse s is displaced by ``s * T_f + tau_code`` (``reading="s_Tf"``) or by
    the literal ``s * T_s + tau_code`` (``reading="s_Ts"``); tau_code is
    uniform on [-T_s, T_s]. For each cluster l the ray energy
    Omega_0 exp(-T_l/Gamma) exp(-(x - T_l)/gamma_l) is averaged against the
    cluster-arrival densities of T_l in [0, x] and T_{l+1} in [x, tau_max].
    """
    if reading not in ("s_Tf", "s_Ts"):
        raise ValueError("reading must be 's_Tf' or 's_Ts'")
    if chan.kind == "single_tap":
        return 0.0
    n_pulses = sys.n_interfering_frames(chan.tau_max) * sys.N_s - 1
    if n_pulses <= 0:
        return 0.0
    step = sys.T_f if reading == "s_Tf" else sys.T_s
    Ts, Lam, tmax, Gam = sys.T_s, chan.Lambda, chan.tau_max, chan.Gamma
    W0 = omega0(chan)

    def next_cluster_beyond(l, x):
        # P(x < T_{l+1} <= tau_max), T_{l+1} ~ Erlang(l, Lambda)
        if x >= tmax:
            return 0.0
        return float(gammainc(l, Lam * tmax) - gammainc(l, Lam * max(x, 0.0)))

    def energy_before(l, x):
        if x <= 0:
            return 0.0
        if l == 1:
            return math.exp(-x / float(gamma_l(chan, 0.0)))
        return _quad(
            lambda T: math.exp(-T / Gam - (x - T) / (chan.k_gamma * T + chan.gamma0)) * _erlang_pdf(l - 1, Lam, T),
            0.0, x, quad, f"omega_sigma inner l={l}",
        )

    total = 0.0
    for s in range(1, n_pulses + 1):
        x_hi = s * step + Ts

        def term(l, s=s):
            def g(tau):
                x = s * step + tau
                b = next_cluster_beyond(l, x)
                return 0.0 if b == 0.0 else energy_before(l, x) * b

            return W0 / (2 * Ts) * _quad(g, -Ts, Ts, quad, f"omega_sigma s={s} l={l}")

        total += _series(term, 1, 1 + Lam * x_hi, _erlang_cap(Lam, tmax), quad.series_rel_cutoff, f"omega_sigma s={s}")
    return total


def sigma_isi2(
    chan: ChannelParams,
    sys: SystemParams,
    R,
    quad: QuadratureSpec = QuadratureSpec(),
    omega_sum: float | None = None,
    reading: str = "s_Tf",
) -> float:
    if omega_sum is None:
        omega_sum = omega_sigma(chan, sys, quad, reading)
    if omega_sum == 0.0:
        return 0.0
    F = chan.frequency_scale()
    return F * sys.E_p * sys.N_s**2 * omega_sum * ray_kernel(chan, R, quad, -R.duration, R.duration)


def mui_kernel(chan: ChannelParams, sys: SystemParams, R, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """sum_{k>=2} int_{-T_f/2}^{T_f/2} int_{-z}^{T_m - z} exp(-y/gamma0) f_p(y; k) R(y+z)^2 dy dz."""
    if chan.kind == "single_tap":
        return 0.0
    T_m, g, rate, R = R.duration, chan.gamma0, chan.lambda2, _smooth(R)
    z_lo, z_hi = -sys.T_f / 2, min(sys.T_f / 2, T_m)
    y_span = T_m - z_lo

    def term(k):
        def inner(z):
            return _quad(
                lambda y: math.exp(-y / g) * _erlang_pdf(k - 1, rate, y) * float(R(y + z)) ** 2,
                max(-z, 0.0), T_m - z, quad, f"mui inner k={k}",
            )

        return _quad(inner, z_lo, z_hi, quad, f"mui outer k={k}", points=[0.0] if z_lo < 0 < z_hi else None)

    return _series(term, 2, 1 + chan.lambda2 * y_span, _erlang_cap(chan.lambda2, y_span), quad.series_rel_cutoff, "mui kernel")


def sigma_mui2(
    chan: ChannelParams,
    sys: SystemParams,
    R,
    quad: QuadratureSpec = QuadratureSpec(),
    omega_sum: float | None = None,
    kernel: float | None = None,
    reading: str = "s_Tf",
) -> float:
    """Both interferer terms (first-ray energy Omega_0 and leftover Omega_Sigma); linear in N_u."""
    if sys.N_u == 0:
        return 0.0
    if omega_sum is None:
        omega_sum = omega_sigma(chan, sys, quad, reading)
    if kernel is None:
        kernel = mui_kernel(chan, sys, R, quad)
    F = chan.frequency_scale()
    return F * sys.E_p * sys.R_b * sys.N_s**2 * sys.N_u * (omega0(chan) + omega_sum) * kernel


def eb_and_noise(chan: ChannelParams, sys: SystemParams, ebn0_dB: float) -> tuple[float, float]:
    """E_b = F Omega_0 N_s^2 E_p and sigma_n^2 = F N_s N0 / 2 with N0 = E_b / (Eb/N0)."""
    F = chan.frequency_scale()
    E_b = F * omega0(chan) * sys.N_s**2 * sys.E_p
    N0 = E_b / 10 ** (ebn0_dB / 10)
    return E_b, F * sys.N_s * N0 / 2


def sinr(E_b, sigma_n2, sigma_iasi2=0.0, sigma_isi2=0.0, sigma_mui2=0.0) -> float:
    denom = sigma_n2 + sigma_iasi2 + sigma_isi2 + sigma_mui2
    if denom <= 0:
        raise ValueError("SINR denominator must be positive")
    return E_b / denom


def ber_bpsk(sinr_value):
    """0.5 erfc(sqrt(SINR / 2))."""
    return 0.5 * erfc(np.sqrt(np.asarray(sinr_value, dtype=float) / 2))


@dataclass(frozen=True)
class InterferenceTerms:
    """Eb/N0-independent pieces, computed once per configuration."""

    sigma_iasi2: float
    sigma_isi2: float
    omega_sigma: float
    sigma_mui2: float


def interference_terms(
    chan: ChannelParams,
    sys: SystemParams,
    R,
    quad: QuadratureSpec = QuadratureSpec(),
    reading: str = "s_Tf",
    mui_kernel_value: float | None = None,
) -> InterferenceTerms:
    """``mui_kernel_value`` may be passed in to reuse it across user counts."""
    w_sum = omega_sigma(chan, sys, quad, reading)
    return InterferenceTerms(
        sigma_iasi2(chan, sys, R, quad),
        sigma_isi2(chan, sys, R, quad, omega_sum=w_sum),
        w_sum,
        sigma_mui2(chan, sys, R, quad, omega_sum=w_sum, kernel=mui_kernel_value),
    )


def analyze(
    chan: ChannelParams,
    sys: SystemParams,
    R,
    ebn0_dB: float,
    quad: QuadratureSpec = QuadratureSpec(),
    toggles: dict | None = None,
    terms: InterferenceTerms | None = None,
    reading: str = "s_Tf",
) -> LinkAnalysis:
    toggles = {"iasi": True, "isi": True, "mui": True, **(toggles or {})}
    if terms is None:
        terms = interference_terms(chan, sys, R, quad, reading)
    E_b, s_n = eb_and_noise(chan, sys, ebn0_dB)
    s_iasi = terms.sigma_iasi2 if toggles["iasi"] else 0.0
    s_isi = terms.sigma_isi2 if toggles["isi"] else 0.0
    s_mui = terms.sigma_mui2 if toggles["mui"] else 0.0
    g = sinr(E_b, s_n, s_iasi, s_isi, s_mui)
    return LinkAnalysis(E_b, s_n, s_iasi, s_isi, terms.omega_sigma, s_mui, g, float(ber_bpsk(g)))

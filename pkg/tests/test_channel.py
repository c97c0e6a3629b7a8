import math

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad

from iruwb.analysis import omega0
from iruwb.channel import (
    ChannelParams,
    ChannelRealization,
    _ray_gaps,
    cluster_energy,
    desired_ray_power,
    from_taps,
    gamma_l,
    generate_realization,
    mean_cluster_interval,
    mean_ray_interval,
    pdf_cluster_delay,
    pdf_code_interval,
    pdf_ray_delay,
    ray_mean_power,
    sample_cluster_arrivals,
    sample_nakagami,
    sample_ray_arrivals,
)


def test_defaults_and_validation():
    c = ChannelParams()
    assert c.Lambda == 0.016 and c.lambda2 == 2.97
    assert c.frequency_scale() == 1.0
    with pytest.raises(ValueError):
        ChannelParams(beta=1.5)
    with pytest.raises(ValueError):
        ChannelParams(Lambda=0.0)
    with pytest.raises(ValueError):
        ChannelParams(ray_model="triple")


class TestArrivals:
    def test_cluster_gaps_scale_with_rate(self, rng):
        for Lam in (0.016, 0.032):
            c = ChannelParams(Lambda=Lam, tau_max=1.2e5 / Lam)
            gaps = np.diff(sample_cluster_arrivals(c, rng))[:100_000]
            assert len(gaps) == 100_000
            assert gaps.mean() == pytest.approx(1 / Lam, rel=0.02)

    def test_short_window_keeps_only_first_cluster(self, rng):
        c = ChannelParams(tau_max=1e-6)
        np.testing.assert_array_equal(sample_cluster_arrivals(c, rng), [0.0])

    def test_first_arrivals_are_zero(self, rng):
        c = ChannelParams()
        assert sample_cluster_arrivals(c, rng)[0] == 0.0
        assert sample_ray_arrivals(c, 10.0, rng)[0] == 0.0
        with pytest.raises(ValueError):
            sample_ray_arrivals(c, 0.0, rng)

    def test_single_poisson_mean_gap(self, rng):
        c = ChannelParams(ray_model="single_poisson")
        gaps = np.diff(sample_ray_arrivals(c, 1.2e5 / 2.97, rng))[:100_000]
        assert gaps.mean() == pytest.approx(0.3367, rel=0.02)

    def test_mixture_degenerates(self, rng):
        a = _ray_gaps(ChannelParams(beta=0.0), rng, 10_000)
        b = _ray_gaps(ChannelParams(ray_model="single_poisson"), rng, 10_000)
        assert stats.ks_2samp(a, b).pvalue > 0.01
        slow = _ray_gaps(ChannelParams(beta=1.0), rng, 100_000)
        assert slow.mean() == pytest.approx(1 / 0.19, rel=0.02)

    def test_mixture_weights_lambda1_by_beta(self, rng):
        c = ChannelParams(beta=0.3)
        gaps = _ray_gaps(c, rng, 200_000)
        assert gaps.mean() == pytest.approx(0.3 / 0.19 + 0.7 / 2.97, rel=0.02)


class TestPowerLaw:
    def test_gamma_l(self):
        c = ChannelParams()
        assert gamma_l(c, 0.0) == c.gamma0
        assert gamma_l(c, 100.0) == c.gamma0
        assert gamma_l(ChannelParams(k_gamma=0.5, gamma0=2.0), 10.0) == pytest.approx(7.0)

    def test_cluster_energy(self, rng):
        c = ChannelParams(M_cluster_dB=0.0)
        assert cluster_energy(c, 0.0) == pytest.approx(1.0)
        assert cluster_energy(c, c.Gamma) == pytest.approx(math.exp(-1))
        shadowed = cluster_energy(ChannelParams(), np.full(100_000, 30.0), rng)
        mean_db = np.mean(10 * np.log10(shadowed))
        assert mean_db == pytest.approx(10 * math.log10(math.exp(-30 / 14.6)), abs=0.1)

    def test_ray_mean_power(self):
        c = ChannelParams()
        p0 = ray_mean_power(c, 1.0, c.gamma0, 0.0)
        norm = (1 - c.beta) * c.lambda1 + c.beta * c.lambda2 + 1
        assert p0 == pytest.approx(1 / (c.gamma0 * norm))
        assert p0 == pytest.approx(omega0(c))
        assert ray_mean_power(c, 1.0, c.gamma0, c.gamma0) == pytest.approx(p0 / math.e)

    def test_dense_cluster_energy_sum(self, rng):
        # with dense arrivals the per-ray normalizer makes the cluster sum close to Omega_l;
        # lambda1 ~ lambda2 so the normalizer's rate weighting does not matter
        c = ChannelParams(beta=0.5, lambda1=49.9, lambda2=50.0, gamma0=6.4)
        totals = [ray_mean_power(c, 1.0, c.gamma0, sample_ray_arrivals(c, 80.0, rng)).sum() for _ in range(10_000)]
        assert np.mean(totals) == pytest.approx(1.0, rel=0.15)


class TestNakagami:
    def test_rayleigh_case(self, rng):
        a2 = sample_nakagami(1.0, 2.0, rng, 1_000_000) ** 2
        assert a2.var() == pytest.approx(4.0, rel=0.02)

    def test_gamma_moments(self, rng):
        a2 = sample_nakagami(3.0, 2.0, rng, 1_000_000) ** 2
        assert a2.mean() == pytest.approx(2.0, rel=0.005)
        assert a2.var() == pytest.approx(4 / 3, rel=0.02)

    def test_rejects_small_m(self, rng):
        with pytest.raises(ValueError):
            sample_nakagami(0.4, 1.0, rng, 10)


class TestRealization:
    def test_first_tap_and_sorting(self, rng):
        ch = generate_realization(ChannelParams(), rng)
        assert ch.cluster[0] == 1 and ch.ray[0] == 1 and ch.delay[0] == 0.0
        assert ch.amplitude[0] == pytest.approx(math.sqrt(omega0(ChannelParams())))
        d, a, first = ch.sorted_taps()
        assert np.all(np.diff(d) >= 0)
        assert first.sum() == 1
        assert np.all(ch.delay <= ChannelParams().tau_max)

    def test_tiny_window(self, rng):
        c = ChannelParams(tau_max=0.1, Lambda=1e-6)
        ch = generate_realization(c, rng)
        assert np.all(ch.cluster == 1)
        assert np.all(ch.delay <= 0.1)

    def test_single_tap(self, rng):
        ch = generate_realization(ChannelParams(kind="single_tap"), rng)
        assert len(ch) == 1 and ch.amplitude[0] == 1.0
        assert desired_ray_power(ChannelParams(kind="single_tap")) == 1.0

    def test_faded_desired_ray_mean_power(self, rng):
        c = ChannelParams(desired_ray="faded")
        win = [(-0.01, 0.01)]
        p = np.array([generate_realization(c, rng, windows=win).amplitude[0] ** 2 for _ in range(100_000)])
        assert p.mean() == pytest.approx(omega0(c), rel=0.03)

    def test_windows_preserve_tap_statistics(self):
        c = ChannelParams()
        rng_a, rng_b = np.random.default_rng(7), np.random.default_rng(8)
        win = [(1.0, 3.0)]
        n_full, n_win, e_full, e_win = [], [], [], []
        for _ in range(3000):
            full = generate_realization(c, rng_a)
            part = generate_realization(c, rng_b, windows=win)
            inside = (full.delay >= 1.0) & (full.delay <= 3.0)
            assert np.all((part.delay[1:] >= 1.0) & (part.delay[1:] <= 3.0))
            n_full.append(inside.sum())
            n_win.append(len(part) - 1)
            e_full.append(np.sum(full.amplitude[inside] ** 2))
            e_win.append(np.sum(part.amplitude[1:] ** 2))
        assert np.mean(n_win) == pytest.approx(np.mean(n_full), rel=0.03)
        assert np.mean(e_win) == pytest.approx(np.mean(e_full), rel=0.05)

    def test_signs_equiprobable(self, rng):
        signs = np.concatenate([np.sign(generate_realization(ChannelParams(), rng).amplitude[1:]) for _ in range(200)])
        assert abs(np.mean(signs)) < 0.05

    def test_csv_roundtrip(self, tmp_path, rng):
        ch = generate_realization(ChannelParams(), rng)
        ch.to_csv(tmp_path / "ch.csv")
        back = ChannelRealization.from_csv(tmp_path / "ch.csv")
        np.testing.assert_allclose(back.delay, ch.delay, rtol=1e-9)
        np.testing.assert_allclose(back.amplitude, ch.amplitude, rtol=1e-9)

    def test_from_taps_requires_first_tap(self):
        with pytest.raises(ValueError):
            from_taps([1, 1], [2, 3], [0.1, 0.2], [1.0, 0.5])


class TestDensities:
    def test_cluster_delay_pdf(self):
        c = ChannelParams()
        x = np.linspace(0, 300, 7)
        np.testing.assert_allclose(pdf_cluster_delay(c, 2, x), c.Lambda * np.exp(-c.Lambda * x))
        # Erlang(2) mode at 1/Lambda
        xs = np.linspace(1, 200, 4000)
        assert xs[np.argmax(pdf_cluster_delay(c, 3, xs))] == pytest.approx(62.5, abs=0.1)
        with pytest.raises(ValueError):
            pdf_cluster_delay(c, 1, 0.0)

    def test_ray_delay_pdf(self):
        c = ChannelParams()
        x = np.linspace(0, 3, 7)
        np.testing.assert_allclose(pdf_ray_delay(c, 2, x), 2.97 * np.exp(-2.97 * x))
        mean = quad(lambda y: y * pdf_ray_delay(c, 2, y), 0, np.inf)[0]
        assert mean == pytest.approx(1 / 2.97, rel=1e-8)
        with pytest.raises(ValueError):
            pdf_ray_delay(c, 1, 0.0)

    def test_code_interval_pdf(self):
        assert pdf_code_interval(8.0, 0.0) == pytest.approx(1 / 16)
        assert pdf_code_interval(8.0, 12.0) == 0.0
        assert quad(lambda x: pdf_code_interval(8.0, x), -8, 8)[0] == pytest.approx(1.0, abs=1e-9)

    def test_mean_intervals(self):
        assert mean_ray_interval(ChannelParams()) == pytest.approx(0.3367, abs=1e-4)
        assert mean_cluster_interval(ChannelParams()) == pytest.approx(62.5)
        assert mean_ray_interval(ChannelParams(lambda1=0.1, lambda2=1.0)) == 1.0

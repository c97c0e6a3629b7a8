import numpy as np
import pytest
from scipy.integrate import quad, trapezoid

from iruwb.pulse import (
    DoubletAutocorrelation,
    autocorrelation,
    bandwidth_10db,
    calibrate_shape_parameter,
    make_gaussian_doublet,
)


def brute_force_R(p, tau, factor=100):
    """Correlate the closed-form truncated pulse on a grid ``factor`` times finer."""
    dt = p.sample_period / factor
    t = np.arange(-p.duration / 2, p.duration / 2 + dt / 2, dt)
    x = p.waveform(t)
    y = p.waveform(t + tau)
    energy = trapezoid(x * x, dx=dt)
    return trapezoid(x * y, dx=dt) / energy


def test_default_pulse_unit_energy_and_bandwidth(pulse):
    assert len(pulse.samples) == 65
    assert pulse.energy == pytest.approx(1.0, abs=1e-12)
    assert bandwidth_10db(pulse) == pytest.approx(5.6, rel=1e-6)


def test_central_extremum_and_symmetry(pulse):
    s = np.asarray(pulse.samples)
    assert abs(s[32]) == pytest.approx(np.max(np.abs(s)))
    np.testing.assert_array_equal(s, s[::-1])


def test_grid_validation():
    with pytest.raises(ValueError):
        make_gaussian_doublet(0.2, 0.5, 0.5 / 16)  # coarser than T_m/32
    with pytest.raises(ValueError):
        make_gaussian_doublet(0.2, 0.5, 0.5 / 63.5)
    with pytest.raises(ValueError):
        make_gaussian_doublet(-0.1, 0.5)


def test_autocorrelation_endpoints(R, pulse):
    assert R(0.0) == 1.0
    assert R(pulse.duration) == 0.0
    assert R(-pulse.duration) == 0.0
    assert R(0.7) == 0.0
    lags = np.linspace(-0.6, 0.6, 501)
    np.testing.assert_allclose(R(lags), R(-lags))
    assert np.all(np.abs(R(lags)) <= 1.0 + 1e-12)


@pytest.mark.parametrize("tau", [0.25, 0.0371, 0.1013, 0.333, 0.47])
def test_autocorrelation_matches_brute_force(R, pulse, tau):
    assert float(R(tau)) == pytest.approx(brute_force_R(pulse, tau), abs=1e-4)


def test_untruncated_autocorrelation_closed_form(pulse):
    tp = pulse.shape_parameter
    Rx = DoubletAutocorrelation(tp)

    def raw(t):
        x2 = (t / tp) ** 2
        return (1 - 4 * np.pi * x2) * np.exp(-2 * np.pi * x2)

    energy = quad(lambda t: raw(t) ** 2, -np.inf, np.inf)[0]
    for tau in (0.0, 0.05, 0.12, 0.3):
        num = quad(lambda t: raw(t) * raw(t + tau), -np.inf, np.inf)[0] / energy
        assert float(Rx(tau)) == pytest.approx(num, abs=1e-10)


def test_bandwidth_scaling():
    # narrow enough that the +-T_m/2 window does not clip either pulse
    a = bandwidth_10db(make_gaussian_doublet(0.1, 0.5))
    b = bandwidth_10db(make_gaussian_doublet(0.2, 0.5))
    assert b / a == pytest.approx(0.5, rel=0.10)
    # scaling time and window together halves the bandwidth exactly
    c = bandwidth_10db(make_gaussian_doublet(0.2093998, 0.5))
    d = bandwidth_10db(make_gaussian_doublet(2 * 0.2093998, 1.0))
    assert d / c == pytest.approx(0.5, rel=1e-3)


def test_calibration_roundtrip():
    tp = calibrate_shape_parameter(4.0, 0.5)
    assert bandwidth_10db(make_gaussian_doublet(tp, 0.5)) == pytest.approx(4.0, rel=1e-6)


def test_csv_dump(tmp_path, pulse, R):
    pulse.to_csv(tmp_path / "p.csv")
    R.to_csv(tmp_path / "r.csv")
    rows = (tmp_path / "p.csv").read_text().splitlines()
    assert rows[0] == "t_ns,value"
    assert len(rows) == 66


def test_smooth_view_agrees_with_table(R):
    S = R.smooth()
    lags = np.linspace(-0.49, 0.49, 777)
    np.testing.assert_allclose(S(lags), R(lags), atol=1e-4)
    assert S(0.5) == 0.0

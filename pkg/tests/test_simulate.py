import numpy as np
import pytest
from hypothesis import given, strategies as st

from gsparse.errors import SimulationError
from gsparse.simulate import (SimConfig, SpatioTemporalField, TimeSeriesSet, rk4_step,
                              simulate_advection_diffusion, simulate_jak_stat,
                              simulate_lambda_omega, spectral_derivative, synth_epor_signal)


# ------------------------------------------------------------------ oracles

def test_rk4_single_step_hand_value():
    y = rk4_step(np.array([1.0]), lambda t, y: y, 0.1)
    assert y[0] == pytest.approx(1.10517083, abs=1e-8)
    np.testing.assert_array_equal(rk4_step(np.array([2.0, 3.0]), lambda t, y: 0 * y, 0.5),
                                  [2.0, 3.0])


def test_rk4_matches_exponential_decay():
    y = np.array([1.0])
    for _ in range(1000):
        y = rk4_step(y, lambda t, y: -y, 1e-3)
    assert abs(y[0] - np.exp(-1)) <= 1e-9


@pytest.mark.parametrize("order", [1, 2])
def test_spectral_derivative_of_sine(order):
    L, n = 3.0, 64
    x = np.arange(n) * L / n
    w = 2 * np.pi / L
    ref = w * np.cos(w * x) if order == 1 else -w ** 2 * np.sin(w * x)
    np.testing.assert_allclose(spectral_derivative(np.sin(w * x), L, order=order), ref,
                               atol=1e-10)
    np.testing.assert_allclose(spectral_derivative(np.full(n, 4.0), L, order=order), 0.0,
                               atol=1e-12)


def test_epor_signal_shape():
    t = np.linspace(0, 40, 401)
    c = synth_epor_signal(t, 2.0, 8.0)
    assert c[0] == 0.0
    assert synth_epor_signal(8.0, 2.0, 8.0) == pytest.approx(2.0)
    assert t[np.argmax(c)] == pytest.approx(8.0)
    assert np.all(c[1:] > 0)


def test_zero_rates_give_constant_trajectories():
    ts = simulate_jak_stat(SimConfig.jak_stat(rates=(0, 0, 0, 0), n_t=50))
    for s in ("x1", "x2", "x3", "x4"):
        np.testing.assert_array_equal(ts.series[s], ts.series[s][0])
    assert set(ts.series) == {"x1", "x2", "x3", "x4", "c"}


def test_jak_stat_conserves_total_receptor():
    ts = simulate_jak_stat(SimConfig.jak_stat())
    total = ts.series["x1"] + ts.series["x2"] + 2 * ts.series["x3"] + 2 * ts.series["x4"]
    assert np.max(np.abs(total - total[0])) <= 1e-8 * abs(total[0])
    assert len(ts.t) == 200


def test_still_field_without_transport():
    cfg = SimConfig.advection_diffusion(D_u=0.0, D_v=0.0, n_x=64, n_t=20)
    f = simulate_advection_diffusion(cfg, velocity=np.zeros(64))
    assert np.max(np.abs(f.data["u"] - f.data["u"][0])) <= 1e-10


def test_advection_diffusion_conserves_mass():
    cfg = SimConfig.advection_diffusion(n_x=128, n_t=60)
    f = simulate_advection_diffusion(cfg)
    dx = f.spacing["x"]
    for s in ("u", "v"):
        # cos initial data has zero mean; measure drift against the L1 mass
        mass = f.data[s].sum(axis=1) * dx
        scale = np.abs(f.data[s][0]).sum() * dx
        assert np.max(np.abs(mass - mass[0])) <= 1e-8 * scale


def test_lambda_omega_fixed_point_and_rotation():
    n = 16
    # RK4 shifts the invariant circle by O(dt^4); dt = 0.01 keeps it below 1e-8
    small = SimConfig.lambda_omega(n_x=n, n_t=21, horizon=2.0, length=10.0, dt=0.01)
    zero = simulate_lambda_omega(small, initial=(np.zeros((n, n)), np.zeros((n, n))))
    assert not np.any(zero.data["u"]) and not np.any(zero.data["v"])
    f = simulate_lambda_omega(small, initial=(np.ones((n, n)), np.zeros((n, n))))
    u, v = f.data["u"][:, 0, 0], f.data["v"][:, 0, 0]
    np.testing.assert_allclose(np.hypot(u, v), 1.0, atol=1e-8)
    beta = small.beta
    np.testing.assert_allclose(u, np.cos(beta * f.t), atol=1e-7)
    np.testing.assert_allclose(v, -np.sin(beta * f.t), atol=1e-7)


def test_lambda_omega_records_snapshot_time():
    cfg = SimConfig.lambda_omega(n_x=32, length=20.0)
    f = simulate_lambda_omega(cfg)
    i = f.time_index(7.5)
    assert f.t[i] == pytest.approx(7.5)
    assert f.data["u"].shape == (201, 32, 32)
    # the spiral keeps |(u, v)| of order one away from the centre
    r = np.hypot(f.data["u"][i], f.data["v"][i])
    assert 0.5 < np.median(r) < 1.2


# ------------------------------------------------------------- properties

@given(st.floats(0.5, 3.0), st.floats(2.0, 12.0))
def test_epor_peak_anywhere(amp, tau):
    t = np.linspace(0, 5 * tau, 2001)
    c = synth_epor_signal(t, amp, tau)
    assert c.max() == pytest.approx(amp, rel=1e-4)


@given(st.integers(1, 5), st.floats(1.0, 10.0))
def test_spectral_derivative_resolves_fourier_modes(mode, L):
    n = 64
    x = np.arange(n) * L / n
    w = 2 * np.pi * mode / L
    np.testing.assert_allclose(spectral_derivative(np.cos(w * x), L), -w * np.sin(w * x),
                               atol=1e-9 * w)


def test_csv_round_trips(tmp_path):
    ts = simulate_jak_stat(SimConfig.jak_stat(n_t=30))
    ts.to_csv(tmp_path / "s.csv", comment="hash")
    back = TimeSeriesSet.from_csv(tmp_path / "s.csv")
    np.testing.assert_array_equal(back.t, ts.t)
    np.testing.assert_array_equal(back.series["x3"], ts.series["x3"])
    f = simulate_advection_diffusion(SimConfig.advection_diffusion(n_x=16, n_t=5))
    f.to_csv(tmp_path / "f.csv")
    g = SpatioTemporalField.from_csv(tmp_path / "f.csv", f.sidecar())
    np.testing.assert_array_equal(g.data["u"], f.data["u"])
    np.testing.assert_array_equal(g.coords["x"], f.coords["x"])


def test_errors():
    with pytest.raises(SimulationError):
        SimConfig(horizon=-1.0)
    with pytest.raises(SimulationError):
        SimConfig(rates=(np.nan, 0, 0, 0))
    with pytest.raises(SimulationError):
        synth_epor_signal(1.0, tau=0.0)
    with pytest.raises(SimulationError), np.errstate(all="ignore"):
        simulate_jak_stat(SimConfig.jak_stat(rates=(1e6, 1e6, 1e6, 1e6), x0=(1e3, 1e3, 1e3, 1e3)))
    f = simulate_advection_diffusion(SimConfig.advection_diffusion(n_x=16, n_t=5))
    with pytest.raises(SimulationError):
        f.time_index(0.123)

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from gsparse.errors import PreprocessError
from gsparse.giht import ModelEstimate
from gsparse.preprocess import (DerivativeSpec, NoiseSpec, add_noise, central_difference,
                                coefficient_errors, polyfit_derivative)


def estimate(names, coef):
    coef = np.asarray(coef, dtype=float)
    return ModelEstimate([], list(np.flatnonzero(coef)), coef, 0.0, 1, True, 0.0, names)


# ------------------------------------------------------------------ oracles

def test_noise_level_matches_request():
    u = np.sin(np.linspace(0, 30, 100_000)) * 3.0
    noisy = add_noise(u, NoiseSpec(0.1, seed=2))
    assert np.std(noisy - u) == pytest.approx(0.1 * u.std(), rel=0.05)
    np.testing.assert_array_equal(add_noise(u, NoiseSpec(0.0)), u)
    np.testing.assert_array_equal(add_noise(u, NoiseSpec(0.1, 5)), add_noise(u, NoiseSpec(0.1, 5)))


def test_polyfit_exact_on_polynomials():
    t = np.linspace(0, 2, 101)
    dt = t[1] - t[0]
    spec = DerivativeSpec(11, 4)
    np.testing.assert_allclose(polyfit_derivative(2 * t, dt, spec, 1), 2.0, atol=1e-10)
    np.testing.assert_allclose(polyfit_derivative(t ** 2, dt, spec, 2), 2.0, atol=1e-8)


def test_polyfit_beats_central_difference_on_noisy_sine():
    t = np.linspace(0, 4 * np.pi, 400)
    dt = t[1] - t[0]
    y = add_noise(np.sin(t), NoiseSpec(0.05, seed=1))
    rmse = lambda d: np.sqrt(np.mean((d - np.cos(t)) ** 2))
    assert rmse(polyfit_derivative(y, dt, DerivativeSpec(11, 4), 1)) < rmse(central_difference(y, dt))


def test_coefficient_error_examples():
    rows = coefficient_errors(estimate(["a", "b"], [0.0231, 0.0]), {"a": 0.021})
    assert rows[0]["error"] == pytest.approx(0.1)
    rows = coefficient_errors(estimate(["a", "b"], [0.021 * 1.05, 0.0]), {"a": 0.021})
    assert rows[0]["error"] == pytest.approx(0.05)
    rows = coefficient_errors(estimate(["a", "b"], [1.0, 2.0]), {"a": 1.0, "b": 2.0})
    assert [r["error"] for r in rows] == [0.0, 0.0]


def test_coefficient_error_statuses():
    rows = coefficient_errors(estimate(["a", "b", "c"], [0.0, 0.5, 0.2]), {"a": 1.0, "b": 0.0})
    assert [r["status"] for r in rows] == ["miss", "zero_truth", "false_positive"]
    assert rows[1]["error"] == 0.5
    with pytest.raises(PreprocessError):
        coefficient_errors(estimate(["a"], [1.0]), {"zz": 1.0})


# ------------------------------------------------------------- properties

@given(arrays(float, (50,), elements=st.floats(-5, 5)), st.floats(0.01, 0.5),
       st.integers(0, 2 ** 31))
def test_noise_shape_and_mean(u, sigma, seed):
    noisy = add_noise(u, NoiseSpec(sigma, seed))
    assert noisy.shape == u.shape
    scale = sigma * u.std()
    assert abs(np.mean(noisy - u)) <= 5 * scale / np.sqrt(u.size) + 1e-12


def test_noise_mean_bound_on_a_large_sample():
    u = np.cos(np.linspace(0, 50, 20_000))
    noisy = add_noise(u, NoiseSpec(0.2, seed=11))
    assert abs(np.mean(noisy - u)) <= 3 * 0.2 * u.std() / np.sqrt(u.size)


@given(st.integers(2, 5), arrays(float, 6, elements=st.floats(-2, 2)))
def test_polyfit_exact_up_to_its_degree(degree, coeffs):
    t = np.linspace(-1, 1, 41)
    c = coeffs[:degree + 1]
    y = np.polyval(c, t)
    spec = DerivativeSpec(9, degree)
    ref = np.polyval(np.polyder(c, 1), t)
    np.testing.assert_allclose(polyfit_derivative(y, t[1] - t[0], spec, 1), ref, atol=1e-8)


def test_dict_noise_uses_one_stream_in_order():
    data = {"a": np.arange(10.0), "b": np.arange(10.0)}
    out = add_noise(data, NoiseSpec(0.3, seed=4))
    assert set(out) == {"a", "b"}
    assert not np.array_equal(out["a"], out["b"])


def test_errors():
    with pytest.raises(PreprocessError):
        NoiseSpec(-0.1)
    with pytest.raises(PreprocessError):
        DerivativeSpec(10, 4)
    with pytest.raises(PreprocessError):
        DerivativeSpec(5, 5)
    with pytest.raises(PreprocessError):
        polyfit_derivative(np.arange(5.0), 1.0, DerivativeSpec(7, 2), 1)
    with pytest.raises(PreprocessError):
        polyfit_derivative(np.arange(20.0), 1.0, DerivativeSpec(7, 2), 3)
    with pytest.raises(PreprocessError):
        add_noise(np.array([np.inf]), NoiseSpec(0.1))

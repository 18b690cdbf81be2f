import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from gsparse.dictionary import Dictionary, TermLabel
from gsparse.errors import SolverError
from gsparse.giht import SolverOptions, debias, giht_solve, group_hard_threshold, lambda_max
from gsparse.groups import GroupStructure
from gsparse.problem import RegressionProblem


def make_problem(theta, target, groups=()):
    theta = np.asarray(theta, dtype=float)
    labels = [TermLabel.parse(f"z{j}") for j in range(theta.shape[1])]
    gs = GroupStructure(theta.shape[1], groups, [str(l) for l in labels])
    return RegressionProblem(Dictionary(theta, labels), target, gs)


def brute_force_keep(v, gs, lam):
    """Minimise the separable objective over every keep/zero pattern; ties keep."""
    best, best_keep = None, None
    for pattern in itertools.product([True, False], repeat=len(gs)):
        cost = 0.0
        for keep, g in zip(pattern, gs.groups):
            vg = v[list(g.indices)]
            cost += lam * np.sqrt(g.size) if keep else 0.5 * vg @ vg
        if best is None or cost < best:
            best, best_keep = cost, pattern
    return [g.name for keep, g in zip(best_keep, gs.groups) if keep]


@st.composite
def threshold_instances(draw):
    p = draw(st.integers(1, 8))
    m = draw(st.integers(1, min(4, p)))
    owner = draw(st.lists(st.integers(0, m - 1), min_size=p, max_size=p))
    groups = [(f"g{k}", [j for j in range(p) if owner[j] == k]) for k in range(m)]
    groups = [g for g in groups if g[1]]
    v = draw(arrays(float, p, elements=st.floats(-3, 3)))
    lam = draw(st.floats(1e-3, 5))
    return v, GroupStructure(p, groups), lam


# ------------------------------------------------------------------ oracles

@given(threshold_instances())
def test_threshold_matches_brute_force_minimiser(case):
    v, gs, lam = case
    out = group_hard_threshold(v, gs, lam)
    kept = [g.name for g in gs if np.any(out[list(g.indices)] != 0)]
    assert kept == brute_force_keep(v, gs, lam)
    for g in gs:
        idx = list(g.indices)
        assert np.array_equal(out[idx], v[idx]) or not out[idx].any()


def test_threshold_hand_examples():
    gs1 = GroupStructure(1)
    assert group_hard_threshold(np.array([0.3]), gs1, 0.04)[0] == 0.3
    gs4 = GroupStructure(4, [("g", [0, 1, 2, 3])])
    v = np.full(4, 0.95)  # norm 1.9
    np.testing.assert_array_equal(group_hard_threshold(v, gs4, 2.0), 0.0)
    np.testing.assert_array_equal(group_hard_threshold(np.zeros(4), gs4, 0.1), 0.0)


def test_threshold_tie_keeps_the_group():
    gs = GroupStructure(1)
    # cost of zeroing 0.5 * 0.25 equals cost of keeping lam = 0.125
    assert group_hard_threshold(np.array([0.5]), gs, 0.125)[0] == 0.5


def test_empty_support_above_lambda_max():
    p = make_problem(np.eye(3), [1.0, -2.0, 0.5])
    opts = SolverOptions(lam=1.01 * lambda_max(p))
    est = giht_solve(p, opts)
    assert est.support == [] and not est.coefficients.any()


def test_orthonormal_exact_recovery():
    q, _ = np.linalg.qr(np.random.default_rng(3).standard_normal((30, 6)))
    xi = np.array([0, 2.0, 0, 0, -1.5, 0])
    p = make_problem(q, q @ xi)
    lam = 0.3 * lambda_max(p, SolverOptions())
    est = giht_solve(p, SolverOptions(lam=lam))
    assert est.support == [1, 4]
    np.testing.assert_allclose(est.coefficients, xi, atol=1e-10)
    assert est.converged


def test_lambda_max_examples():
    p = make_problem([[1.0]], [3.0])
    opts = SolverOptions(step_mode="fixed", step=1.0, normalize=False)
    # the smallest lambda that empties the first step: c^2 / 2
    assert lambda_max(p, opts) == pytest.approx(4.5)
    assert lambda_max(make_problem([[1.0]], [0.0]), opts) == 0.0


def test_debias_examples():
    u = np.array([1.0, -2.0, 3.0])
    p = make_problem(np.eye(3), u)
    np.testing.assert_allclose(debias(p, [0, 1, 2]), u)
    np.testing.assert_array_equal(debias(p, []), 0.0)
    est = giht_solve(p, SolverOptions(lam=1e6))
    assert est.residual_norm == pytest.approx(np.linalg.norm(u))


# ------------------------------------------------------------- properties

@given(threshold_instances())
def test_threshold_is_idempotent(case):
    v, gs, lam = case
    once = group_hard_threshold(v, gs, lam)
    np.testing.assert_array_equal(group_hard_threshold(once, gs, lam), once)


@given(threshold_instances(), st.floats(1.0, 10.0))
def test_threshold_support_shrinks_with_lambda(case, factor):
    v, gs, lam = case
    small = group_hard_threshold(v, gs, lam) != 0
    large = group_hard_threshold(v, gs, lam * factor) != 0
    assert not np.any(large & ~small)


@given(arrays(float, 6, elements=st.floats(-3, 3)), st.floats(1e-3, 4))
def test_singletons_reduce_to_elementwise_hard_threshold(v, lam):
    out = group_hard_threshold(v, GroupStructure(6), lam)
    np.testing.assert_array_equal(out, np.where(np.abs(v) >= np.sqrt(2 * lam), v, 0.0))


@given(arrays(float, (12, 4), elements=st.floats(-2, 2)),
       arrays(float, 12, elements=st.floats(-2, 2)))
def test_lambda_max_scales_quadratically(theta, u):
    opts = SolverOptions()
    p1 = make_problem(theta + np.eye(12, 4), u)
    p2 = make_problem(theta + np.eye(12, 4), 2 * u)
    assert lambda_max(p2, opts) == pytest.approx(4 * lambda_max(p1, opts), rel=1e-9, abs=1e-12)


@given(st.integers(0, 10_000))
def test_first_step_above_lambda_max_is_empty(seed):
    rng = np.random.default_rng(seed)
    theta = rng.standard_normal((20, 6))
    p = make_problem(theta, rng.standard_normal(20), [("a", [0, 1]), ("b", [2, 3, 4])])
    est = giht_solve(p, SolverOptions(lam=lambda_max(p) * 1.000001, max_iter=1))
    assert est.support == []


@given(st.integers(0, 10_000))
def test_coefficients_vanish_off_support_and_debias_fits_support(seed):
    rng = np.random.default_rng(seed)
    theta = rng.standard_normal((25, 6))
    u = theta[:, [0, 3]] @ [1.0, -2.0] + 0.1 * rng.standard_normal(25)
    p = make_problem(theta, u, [("a", [0, 1]), ("b", [3, 4])])
    est = giht_solve(p, SolverOptions(lam=0.2 * lambda_max(p)))
    off = np.setdiff1d(np.arange(6), est.support)
    assert not est.coefficients[off].any()
    assert est.residual_norm >= 0
    if est.support:
        ref = debias(p, est.support)
        np.testing.assert_allclose(est.coefficients, ref, atol=1e-8)
        # any other coefficients on the same support fit no better
        other = ref.copy()
        other[est.support] += 0.01
        assert np.linalg.norm(u - theta @ ref) <= np.linalg.norm(u - theta @ other)


@given(st.integers(0, 10_000))
def test_normalisation_matches_prenormalised_problem(seed):
    rng = np.random.default_rng(seed)
    theta = rng.standard_normal((30, 5)) * rng.uniform(0.1, 10, 5)
    u = theta[:, [1, 2]] @ [1.0, 0.5] + 0.05 * rng.standard_normal(30)
    a = make_problem(theta, u)
    b = make_problem(theta / np.linalg.norm(theta, axis=0), u)
    lam = 0.3 * lambda_max(a)
    sa = giht_solve(a, SolverOptions(lam=lam)).support
    sb = giht_solve(b, SolverOptions(lam=lam, normalize=False)).support
    assert sa == sb


@pytest.mark.parametrize("normalize", [True, False])
def test_mean_loss_is_invariant_to_row_replication(normalize):
    rng = np.random.default_rng(8)
    theta = rng.standard_normal((40, 6))
    u = theta[:, [0, 2]] @ [1.0, -0.7] + 0.2 * rng.standard_normal(40)
    one = make_problem(theta, u)
    two = make_problem(np.vstack([theta, theta]), np.concatenate([u, u]))
    mean = SolverOptions(loss="mean", normalize=normalize)
    assert lambda_max(one, mean) == pytest.approx(lambda_max(two, mean), rel=1e-10)
    total = SolverOptions(loss="sum", normalize=True)
    assert lambda_max(two, total) == pytest.approx(2 * lambda_max(one, total), rel=1e-10)
    for frac in (0.2, 0.5, 0.8):
        lam = frac * lambda_max(one, mean)
        s1 = giht_solve(one, SolverOptions(lam=lam, loss="mean", normalize=normalize)).support
        s2 = giht_solve(two, SolverOptions(lam=lam, loss="mean", normalize=normalize)).support
        assert s1 == s2


def test_errors_and_flags():
    with pytest.raises(SolverError):
        SolverOptions(lam=-1)
    with pytest.raises(SolverError):
        SolverOptions(step_mode="fixed")
    with pytest.raises(SolverError):
        SolverOptions(loss="median")
    with pytest.raises(SolverError):
        group_hard_threshold(np.zeros(3), GroupStructure(2), 1.0)
    theta = np.column_stack([np.ones(5), np.ones(5), np.arange(5.0)])
    p = make_problem(theta, np.ones(5), [("tied", [0, 1])])
    est = giht_solve(p, SolverOptions(lam=1e-6))
    assert "rank_deficient_debias" in est.flags
    d = est.to_dict()
    assert d["support"]["indices"] == [j + 1 for j in est.support]

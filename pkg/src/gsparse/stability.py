"""Stability selection over a regularisation path."""

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import SolverError, GsparseError
from .giht import PreparedProblem, SolverOptions

__all__ = [
    "StabilityPath",
    "SelectionResult",
    "AchievabilityCurve",
    "subsample_rows",
    "lambda_grid",
    "stability_path",
    "generalized_binomial",
    "pi_threshold",
    "implied_fp_bound",
    "select_stable",
    "achievability",
    "bernoulli_band",
]


def subsample_rows(problem, fraction, seed=None, rng=None):
    """Draw ``ceil(fraction * n_b)`` rows without replacement inside every row block."""
    if not 0 < fraction <= 1:
        raise GsparseError(f"subsample fraction must be in (0, 1], got {fraction}")
    if fraction == 1:
        return problem
    rng = rng if rng is not None else np.random.default_rng(seed)
    blocks = problem.dictionary.row_blocks
    rows = []
    for b in np.unique(blocks):
        idx = np.flatnonzero(blocks == b)
        size = math.ceil(fraction * len(idx))
        if size < 2:
            raise GsparseError(f"block {b} would keep only {size} row(s)")
        rows.append(np.sort(rng.choice(idx, size=size, replace=False)))
    return problem.take_rows(np.concatenate(rows))


def lambda_grid(lam_max, n_lambda, ratio=0.1):
    """Log-spaced, strictly decreasing grid from ``lam_max`` to ``ratio * lam_max``."""
    if n_lambda < 2:
        raise GsparseError("n_lambda must be >= 2")
    if lam_max <= 0:
        raise GsparseError("lambda_max is zero; the target carries no signal")
    return np.geomspace(lam_max, ratio * lam_max, n_lambda)


@dataclass
class StabilityPath:
    lambdas: np.ndarray
    importance: np.ndarray  # (n_lambda, n_groups)
    group_names: list
    B: int
    subsample_fraction: float
    seed: int
    selected_counts: np.ndarray  # (B, n_lambda); -1 marks a failed solve
    p: int
    tied_size: int
    failures: int = 0
    meta: dict = field(default_factory=dict)

    def mean_selected(self):
        """``q(lambda)``: mean number of selected groups per successful subsample."""
        c = np.where(self.selected_counts >= 0, self.selected_counts, 0)
        ok = (self.selected_counts >= 0).sum(axis=0)
        return c.sum(axis=0) / np.maximum(ok, 1)

    def importance_of(self, name):
        return self.importance[:, self.group_names.index(name)]

    def rows(self):
        for i, lam in enumerate(self.lambdas):
            for j, name in enumerate(self.group_names):
                yield lam, name, self.importance[i, j]

    def to_csv(self, path, comment=None):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["lambda", "group", "importance"])
            for lam, name, imp in self.rows():
                w.writerow([repr(float(lam)), name, repr(float(imp))])

    def meta_dict(self):
        return {"B": self.B, "subsample_fraction": self.subsample_fraction, "seed": self.seed,
                "n_lambda": len(self.lambdas), "lambda_max": float(self.lambdas[0]),
                "lambda_min": float(self.lambdas[-1]), "p": self.p, "k": self.tied_size,
                "failures": self.failures, "q_definition": "mean selected groups per subsample",
                **self.meta}


def _subsample_selections(problem, lambdas, b, seed, fraction, opts):
    # per-subsample stream keyed by (seed, b): independent of execution order
    rng = np.random.default_rng([seed, b])
    sub = subsample_rows(problem, fraction, rng=rng)
    prep = PreparedProblem(sub, opts)
    m = len(problem.groups)
    sel = np.zeros((len(lambdas), m), dtype=bool)
    counts = np.zeros(len(lambdas), dtype=int)
    for i, lam in enumerate(lambdas):
        try:
            support, *_ = prep.iterate(lam, opts)
        except SolverError:
            counts[i] = -1
            continue
        sel[i, list(support)] = True
        counts[i] = len(support)
    return sel, counts


def stability_path(problem, B=100, fraction=0.5, n_lambda=25, seed=0, opts=None,
                   lambdas=None, threads=1):
    """Selection frequency of every group along a decreasing lambda grid.

    The grid spans ``[lambda_max, 0.1 * lambda_max]`` of the full problem
    unless ``lambdas`` is given. Subsamples run independently (optionally on
    ``threads`` workers) and are reduced in index order.
    """
    if B < 1:
        raise GsparseError("B must be >= 1")
    opts = opts or SolverOptions()
    if lambdas is None:
        lambdas = lambda_grid(PreparedProblem(problem, opts).lambda_max(), n_lambda)
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(np.diff(lambdas) >= 0):
        raise GsparseError("lambda grid must be strictly decreasing")

    def work(b):
        return _subsample_selections(problem, lambdas, b, seed, fraction, opts)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(work, range(B)))
    else:
        results = [work(b) for b in range(B)]
    sel = np.stack([r[0] for r in results])
    counts = np.stack([r[1] for r in results])
    ok = counts >= 0
    valid = ok.sum(axis=0)
    importance = sel.sum(axis=0) / np.maximum(valid, 1)[:, None]
    return StabilityPath(
        lambdas=lambdas,
        importance=importance,
        group_names=problem.groups.names,
        B=B,
        subsample_fraction=fraction,
        seed=seed,
        selected_counts=counts,
        p=problem.p,
        tied_size=problem.groups.tied_size(),
        failures=int((~ok).sum()),
    )


def generalized_binomial(q, k):
    """``C(q, k)`` as the falling-factorial product, valid for real ``q``."""
    out = 1.0
    for i in range(int(k)):
        out *= (q - i) / (i + 1)
    return out


def pi_threshold(q, p, k, E_fp):
    """Selection threshold that bounds the expected false positives by ``E_fp``."""
    if k < 1 or E_fp <= 0:
        raise GsparseError("need k >= 1 and E_fp > 0")
    return 0.5 + generalized_binomial(q, k) ** 2 / (2 * generalized_binomial(p, k) * E_fp)


def implied_fp_bound(q, p, k, pi_th):
    """Expected-false-positive bound implied by ``pi_th`` and ``q`` selections."""
    return generalized_binomial(q, k) ** 2 / ((2 * pi_th - 1) * generalized_binomial(p, k))


@dataclass
class SelectionResult:
    stable_set: list
    lambda_s: float
    pi_threshold: float
    expected_fp_bound: float
    index: int = -1
    q: float = 0.0
    diagnostic: str = ""

    def to_dict(self):
        return {"stable_set": list(self.stable_set), "lambda_s": self.lambda_s,
                "pi_threshold": self.pi_threshold, "expected_fp_bound": self.expected_fp_bound,
                "lambda_index": self.index, "q": self.q, "diagnostic": self.diagnostic}


def select_stable(path, pi_th=0.8, E_fp=1.0, k=None):
    """Stable groups at the smallest admissible lambda of the path.

    Walking down from ``lambda_max``, a grid point is admissible while the
    bound implied by ``pi_th`` and ``q(lambda)`` stays ``<= E_fp``;
    ``lambda_s`` is the last admissible point before the first violation.
    The stable set holds the groups with importance ``>= pi_th`` there.
    ``k`` defaults to the size of the largest (tied) group.
    """
    if not 0.5 < pi_th <= 1:
        raise GsparseError(f"pi_th must lie in (0.5, 1], got {pi_th}")
    k = path.tied_size if k is None else k
    q = path.mean_selected()
    bounds = np.array([implied_fp_bound(qi, path.p, k, pi_th) for qi in q])
    idx = -1
    for i, bnd in enumerate(bounds):
        if bnd > E_fp:
            break
        idx = i
    if idx < 0:
        return SelectionResult([], float("nan"), pi_th, float(bounds[0]), -1, float(q[0]),
                               "no lambda satisfies the false-positive bound")
    imp = path.importance[idx]
    stable = [n for n, v in zip(path.group_names, imp) if v >= pi_th]
    return SelectionResult(stable, float(path.lambdas[idx]), pi_th, float(bounds[idx]), idx,
                           float(q[idx]))


def bernoulli_band(p_hat, trials):
    return math.sqrt(p_hat * (1 - p_hat) / trials)


@dataclass
class AchievabilityCurve:
    x: np.ndarray
    success_prob: np.ndarray
    band: np.ndarray
    trials: int
    x_name: str = "N"
    outcomes: np.ndarray = None  # (len(x), trials) bool

    def to_csv(self, path, comment=None):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "success_prob", "band"])
            for x, pr, bd in zip(self.x, self.success_prob, self.band):
                w.writerow([repr(float(x)), repr(float(pr)), repr(float(bd))])


def achievability(run_trial, xs, trials, truth, x_name="N", log=None):
    """Exact-recovery frequency of ``truth`` over ``trials`` runs per grid point.

    ``run_trial(x, t)`` returns the stable set of trial ``t`` at grid value
    ``x``; any exception counts as a failed trial. Success is set equality.
    """
    if trials < 1:
        raise GsparseError("trials must be >= 1")
    truth = set(truth)
    if not truth:
        raise GsparseError("truth must be non-empty")
    outcomes = np.zeros((len(xs), trials), dtype=bool)
    for i, x in enumerate(xs):
        for t in range(trials):
            try:
                outcomes[i, t] = set(run_trial(x, t)) == truth
            except Exception as exc:  # noqa: BLE001 - failures score as non-success
                if log is not None:
                    log.warning("trial %d at %s=%s failed: %s", t, x_name, x, exc)
    prob = outcomes.mean(axis=1)
    band = np.array([bernoulli_band(p_, trials) for p_ in prob])
    return AchievabilityCurve(np.asarray(xs, dtype=float), prob, band, trials, x_name, outcomes)

"""Group iterative hard thresholding with de-biasing.

Each iteration takes a gradient step on the least-squares loss, zeroes
every group whose norm falls below ``sqrt(2 * lam * sqrt(p_g))`` and refits
unpenalised least squares on the surviving columns.

The threshold is the exact per-group minimiser of
``0.5 * ||xi_g - v_g||^2 + lam * sqrt(p_g) * [xi_g != 0]`` over
``xi_g in {0, v_g}``: zeroing costs ``||v_g||^2 / 2``, keeping costs
``lam * sqrt(p_g)``.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import SolverError
from .numerics import least_squares, normalize_columns, spectral_norm_sq

__all__ = [
    "SolverOptions",
    "ModelEstimate",
    "group_hard_threshold",
    "giht_solve",
    "debias",
    "lambda_max",
    "PreparedProblem",
]


@dataclass
class SolverOptions:
    lam: float = 0.0
    max_iter: int = 10000
    step_mode: str = "lipschitz"
    step: float = None
    tol: float = 1e-8
    patience: int = 3
    normalize: bool = True
    loss: str = "sum"

    def __post_init__(self):
        if not self.lam >= 0:
            raise SolverError(f"lambda must be >= 0, got {self.lam}")
        if self.max_iter < 1:
            raise SolverError("max_iter must be >= 1")
        if not self.tol > 0:
            raise SolverError("tol must be > 0")
        if self.step_mode not in ("lipschitz", "fixed"):
            raise SolverError(f"unknown step_mode {self.step_mode!r}")
        if self.loss not in ("sum", "mean"):
            raise SolverError(f"unknown loss {self.loss!r}; use 'sum' or 'mean'")
        if self.step_mode == "fixed" and not (self.step and self.step > 0):
            raise SolverError("fixed step_mode needs a positive step")


@dataclass
class ModelEstimate:
    support_groups: list
    support: list
    coefficients: np.ndarray
    residual_norm: float
    iterations_used: int
    converged: bool
    lam: float
    column_names: list
    flags: list = field(default_factory=list)
    options: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "lambda": self.lam,
            "support": {"groups": list(self.support_groups),
                        "labels": [self.column_names[j] for j in self.support],
                        "indices": [j + 1 for j in self.support]},
            "coefficients": {self.column_names[j]: float(self.coefficients[j])
                             for j in range(len(self.coefficients))},
            "residual_norm": self.residual_norm,
            "iterations_used": self.iterations_used,
            "converged": self.converged,
            "flags": list(self.flags),
            "options": dict(self.options),
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text


def _group_layout(gs):
    perm = np.concatenate([np.asarray(g.indices, dtype=int) for g in gs.groups])
    starts = np.cumsum([0] + [g.size for g in gs.groups[:-1]])
    return perm, starts


def group_hard_threshold(v, gs, lam):
    """Keep a group unchanged when ``||v_g||^2 / 2 >= lam * sqrt(p_g)``, else zero it.

    Ties keep the group.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (gs.p,):
        raise SolverError(f"vector of length {v.shape} does not match p = {gs.p}")
    if lam < 0:
        raise SolverError("lambda must be >= 0")
    keep = _kept_groups(v, gs, lam)
    out = np.zeros_like(v)
    for k in keep:
        idx = list(gs.groups[k].indices)
        out[idx] = v[idx]
    return out


def _kept_groups(v, gs, lam, layout=None):
    perm, starts = layout or _group_layout(gs)
    norms2 = np.add.reduceat(v[perm] ** 2, starts)
    # compare the two per-group costs; equality keeps the group
    return np.flatnonzero(0.5 * norms2 >= lam * np.sqrt(gs.sizes))


# below this width the Gram matrix is small enough to diagonalise directly
_EIG_DIRECT_MAX_P = 2000


def _largest_eigenvalue(gram, theta, n_scale=1.0):
    if gram.shape[0] <= _EIG_DIRECT_MAX_P:
        return float(np.linalg.eigvalsh(gram)[-1]) if gram.size else 0.0
    return spectral_norm_sq(theta) / n_scale


class PreparedProblem:
    """Normalised dictionary, Gram matrix and step size for repeated solves.

    Supports seen once keep their de-biased solution, so scanning a
    regularisation path on the same data is cheap.
    """

    def __init__(self, problem, opts=None):
        opts = opts or SolverOptions()
        theta = problem.theta
        self.gs = problem.groups
        self.target = problem.target
        self.column_names = problem.column_names
        self.normalize = opts.normalize
        if opts.normalize:
            self.theta_n, self.scales, self.zero_cols = normalize_columns(theta)
        else:
            self.theta_n = np.asarray(theta, dtype=float)
            self.scales = np.ones(theta.shape[1])
            self.zero_cols = np.zeros(theta.shape[1], dtype=bool)
        self.theta = theta
        n = max(theta.shape[0], 1)
        if opts.loss == "mean":
            # per-sample loss 0.5/n ||U - Theta xi||^2 on unit-RMS columns:
            # gradients and coefficients no longer scale with the row count,
            # so one lambda grid means the same thing on every subsample
            if opts.normalize:
                self.theta_n = self.theta_n * np.sqrt(n)
                self.scales = self.scales / np.sqrt(n)
            self.gram = self.theta_n.T @ self.theta_n / n
            self.proj = self.theta_n.T @ self.target / n
        else:
            self.gram = self.theta_n.T @ self.theta_n
            self.proj = self.theta_n.T @ self.target
        if opts.step_mode == "fixed":
            self.mu = float(opts.step)
        else:
            L = _largest_eigenvalue(self.gram, self.theta_n, n if opts.loss == "mean" else 1.0)
            self.mu = 1.0 / L if L > 0 else 1.0
        self.layout = _group_layout(self.gs)
        self._cache = {(): (np.zeros(theta.shape[1]), True)}

    def lambda_max(self):
        v0 = self.mu * self.proj
        perm, starts = self.layout
        norms2 = np.add.reduceat(v0[perm] ** 2, starts)
        return float(np.max(0.5 * norms2 / np.sqrt(self.gs.sizes))) if len(norms2) else 0.0

    def debiased(self, support):
        """De-biased coefficients (normalised scale) for a tuple of group positions."""
        hit = self._cache.get(support)
        if hit is not None:
            return hit
        cols = np.sort(np.concatenate([self.gs.groups[k].indices for k in support])).astype(int)
        xs, full = least_squares(self.theta_n[:, cols], self.target, return_info=True)
        xi = np.zeros(self.theta_n.shape[1])
        xi[cols] = xs
        self._cache[support] = (xi, full)
        return xi, full

    def iterate(self, lam, opts):
        """Run the thresholding iteration; returns ``(support, xi_n, iters, converged, full_rank)``."""
        xi = np.zeros(self.theta_n.shape[1])
        prev = None
        same = 0
        seen = {}
        history = []
        for k in range(1, opts.max_iter + 1):
            v = xi - self.mu * (self.gram @ xi - self.proj)
            if not np.all(np.isfinite(v)):
                raise SolverError(f"non-finite iterate at iteration {k}")
            support = tuple(_kept_groups(v, self.gs, lam, self.layout).tolist())
            new, full = self.debiased(support)
            same = same + 1 if support == prev else 0
            change = np.linalg.norm(new - xi) / max(np.linalg.norm(new), 1e-300)
            xi = new
            if same >= opts.patience and change < opts.tol:
                return support, xi, k, True, full
            if support != prev and support in seen:
                # each iterate is a function of the support alone, so the
                # sequence is periodic from here on: jump to max_iter
                start = seen[support]
                period = k - start
                final = history[start - 1 + (opts.max_iter - start) % period]
                xi, full = self.debiased(final)
                return final, xi, opts.max_iter, False, full
            seen.setdefault(support, k)
            history.append(support)
            prev = support
        return prev, xi, opts.max_iter, False, full

    def solve(self, opts):
        support, xi_n, iters, converged, full = self.iterate(opts.lam, opts)
        coef = xi_n / self.scales
        resid = float(np.linalg.norm(self.target - self.theta @ coef))
        cols = sorted(int(j) for k in support for j in self.gs.groups[k].indices)
        flags = []
        if not full:
            flags.append("rank_deficient_debias")
        if np.any(self.zero_cols):
            flags.append("zero_columns")
        return ModelEstimate(
            support_groups=[self.gs.groups[k].name for k in support],
            support=cols,
            coefficients=coef,
            residual_norm=resid,
            iterations_used=iters,
            converged=converged,
            lam=float(opts.lam),
            column_names=list(self.column_names),
            flags=flags,
            options=asdict(opts),
        )


def giht_solve(problem, opts):
    """Solve the group-sparse regression problem at ``opts.lam``.

    Starts from zero coefficients. Stops once the support has been
    unchanged for ``opts.patience`` iterations and the relative coefficient
    change is below ``opts.tol``, or after ``opts.max_iter`` iterations.

    Returns
    -------
    ModelEstimate
        Coefficients are reported on the original column scale.
    """
    return PreparedProblem(problem, opts).solve(opts)


def debias(problem, support):
    """Least-squares coefficients on ``support`` (column indices), zeros elsewhere."""
    coef = np.zeros(problem.p)
    support = sorted(int(j) for j in support)
    if not support:
        return coef
    if not all(0 <= j < problem.p for j in support):
        raise SolverError("support index out of range")
    coef[support] = least_squares(problem.theta[:, support], problem.target)
    return coef


def lambda_max(problem, opts=None):
    """Smallest lambda at which the first thresholding step zeroes every group.

    This is ``max_g ||v0_g||^2 / (2 sqrt(p_g))`` with ``v0 = mu * Theta^T U_t``
    the first gradient step from zero.
    """
    return PreparedProblem(problem, opts).lambda_max()

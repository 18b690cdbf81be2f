"""Dense linear-algebra helpers used by the solver and the simulators."""

import numpy as np
from scipy.linalg import solve_triangular

from .errors import NumericsError

__all__ = [
    "least_squares",
    "spectral_norm_sq",
    "normalize_columns",
    "denormalize_coefficients",
]


def _as_finite(name, a, ndim):
    a = np.asarray(a, dtype=float)
    if a.ndim != ndim:
        raise NumericsError(f"{name} must be {ndim}-dimensional, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericsError(f"{name} contains non-finite entries")
    return a


def least_squares(A, b, rcond=1e-12, return_info=False):
    """Minimise ``||A x - b||_2`` with a Householder QR factorisation.

    Parameters
    ----------
    A : (m, n) array_like
    b : (m,) array_like
    rcond : float
        Relative cut-off on the diagonal of R below which ``A`` is treated
        as rank deficient.

    Returns
    -------
    x : (n,) ndarray
        The least-squares solution. When ``A`` is rank deficient the
        minimum-norm solution is returned instead.
    full_rank : bool
        Only when ``return_info`` is set.
    """
    A = _as_finite("A", A, 2)
    b = _as_finite("b", b, 1)
    m, n = A.shape
    if m != b.shape[0]:
        raise NumericsError(f"dimension mismatch: A has {m} rows, b has {b.shape[0]}")
    if n == 0:
        x = np.zeros(0)
        return (x, True) if return_info else x
    if m >= n:
        q, r = np.linalg.qr(A, mode="reduced")
        d = np.abs(np.diag(r))
        if d.min() > rcond * max(d.max(), np.finfo(float).tiny):
            x = solve_triangular(r, q.T @ b, check_finite=False)
            return (x, True) if return_info else x
    # rank deficient or under-determined: minimum-norm solution
    x, *_ = np.linalg.lstsq(A, b, rcond=rcond)
    return (x, False) if return_info else x


def spectral_norm_sq(A, tol=1e-6, max_iter=1000, seed=0):
    """Largest eigenvalue of ``A.T @ A`` by power iteration.

    The start vector is drawn from a fixed seed so the estimate is
    reproducible. Raises :class:`NumericsError` (carrying the best estimate
    in ``.estimate``) when the relative change does not drop below ``tol``
    within ``max_iter`` iterations.
    """
    A = _as_finite("A", A, 2)
    if A.size == 0:
        raise NumericsError("empty matrix")
    if tol <= 0:
        raise ValueError("tol must be positive")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = A.T @ (A @ v)
        new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(new - est) <= tol * abs(new):
            # Rayleigh quotient of the last iterate is a lower bound
            return max(new, float(np.linalg.norm(A @ v) ** 2))
        est = new
    err = NumericsError(f"power iteration did not converge in {max_iter} iterations")
    err.estimate = est
    raise err


def normalize_columns(A):
    """Scale every column of ``A`` to unit Euclidean norm.

    Returns
    -------
    An : ndarray
        Normalised copy of ``A``.
    scales : ndarray
        Column norms; all-zero columns get scale 1.
    zero_cols : ndarray of bool
        Flags the all-zero columns.
    """
    A = np.asarray(A, dtype=float)
    scales = np.linalg.norm(A, axis=0)
    zero_cols = scales == 0.0
    scales = np.where(zero_cols, 1.0, scales)
    return A / scales, scales, zero_cols


def denormalize_coefficients(xi, scales):
    """Map coefficients fitted on normalised columns back to the original scale."""
    return np.asarray(xi, dtype=float) / np.asarray(scales, dtype=float)

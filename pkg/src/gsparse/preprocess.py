"""Noise injection, local-polynomial differentiation and coefficient scoring."""

from dataclasses import dataclass

import numpy as np
from scipy.signal import savgol_filter

from .errors import PreprocessError

__all__ = [
    "NoiseSpec",
    "DerivativeSpec",
    "add_noise",
    "polyfit_derivative",
    "central_difference",
    "coefficient_errors",
]


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise PreprocessError(f"noise level must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class DerivativeSpec:
    """Window length (odd, >= 5) and polynomial degree of the local fit."""

    window: int = 11
    degree: int = 4

    def __post_init__(self):
        if self.window < 5 or self.window % 2 == 0:
            raise PreprocessError(f"window must be odd and >= 5, got {self.window}")
        if not 2 <= self.degree < self.window:
            raise PreprocessError(
                f"degree must satisfy 2 <= degree < window, got {self.degree}")


def add_noise(data, spec, rng=None):
    """Return ``u + sigma * std(u) * N(0, 1)``.

    ``data`` is an array or a dict of per-species arrays; each species is
    scaled by its own standard deviation over all samples. Species are
    processed in dict order from a single generator seeded by
    ``spec.seed`` (or from ``rng`` when given).
    """
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    if isinstance(data, dict):
        return {k: _noisy(v, spec.sigma, rng) for k, v in data.items()}
    return _noisy(data, spec.sigma, rng)


def _noisy(u, sigma, rng):
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise PreprocessError("cannot add noise to non-finite data")
    if sigma == 0:
        return u.copy()
    return u + sigma * u.std() * rng.standard_normal(u.shape)


def polyfit_derivative(series, spacing, spec, order, axis=-1, periodic=False):
    """Derivative of a local least-squares polynomial fit.

    At every sample a degree ``spec.degree`` polynomial is fitted over the
    centred window of ``spec.window`` points and its ``order``-th
    derivative is evaluated there. Near the ends of a non-periodic axis the
    window is shifted inward (one-sided fit); with ``periodic=True`` it
    wraps around.
    """
    series = np.asarray(series, dtype=float)
    if order > spec.degree:
        raise PreprocessError(f"derivative order {order} exceeds polynomial degree {spec.degree}")
    n = series.shape[axis]
    if spec.window > n:
        raise PreprocessError(f"window {spec.window} exceeds series length {n}")
    if spacing <= 0:
        raise PreprocessError("spacing must be positive")
    return savgol_filter(series, spec.window, spec.degree, deriv=order, delta=spacing,
                         axis=axis, mode="wrap" if periodic else "interp")


def central_difference(series, spacing):
    """Second-order finite difference (one-sided at the ends)."""
    return np.gradient(np.asarray(series, dtype=float), spacing, edge_order=2)


def coefficient_errors(estimate, truth):
    """Per-term relative error of an estimate against known coefficients.

    Parameters
    ----------
    estimate : ModelEstimate
    truth : dict
        Maps qualified column names (``"x1:c*x1"``) to true values.

    Returns
    -------
    list of dict
        One row per true term (status ``ok``, ``miss`` or ``zero_truth``)
        followed by one row per selected column that is not a true term
        (status ``false_positive``).
    """
    names = list(estimate.column_names)
    index = {n: j for j, n in enumerate(names)}
    coef = np.asarray(estimate.coefficients)
    rows = []
    for term, true in truth.items():
        if term not in index:
            raise PreprocessError(f"true term {term!r} is not a dictionary column")
        est = float(coef[index[term]])
        if true == 0:
            rows.append(dict(term=term, true=0.0, estimate=est, error=abs(est),
                             status="zero_truth"))
            continue
        status = "ok" if est != 0 else "miss"
        rows.append(dict(term=term, true=float(true), estimate=est,
                         error=abs(est - true) / abs(true), status=status))
    for j in np.flatnonzero(coef):
        if names[j] not in truth:
            rows.append(dict(term=names[j], true=0.0, estimate=float(coef[j]),
                             error=abs(float(coef[j])), status="false_positive"))
    return rows

"""Candidate-term dictionaries.

A term is a product of factors ``var_deriv^power``: ``u^2*u_x`` is
``u`` squared times the first x-derivative of ``u``. Plain variables have an
empty derivative string. The constant term has no factors and prints as
``1``.
"""

from dataclasses import dataclass, field
from itertools import combinations_with_replacement
import re

import numpy as np

from .errors import DictionaryError

__all__ = [
    "TermLabel",
    "Dictionary",
    "evaluate_terms",
    "monomial_features",
    "derivative_features",
    "stack_blocks",
    "swap_image",
    "graded_lex_sort",
    "JAK_STAT_ROSTER",
    "advection_roster",
    "reaction_diffusion_roster",
]

_FACTOR_RE = re.compile(r"^([A-Za-z][A-Za-z0-9]*)(?:_([a-z]+))?(?:\^(\d+))?$")


@dataclass(frozen=True)
class TermLabel:
    """Canonical description of one dictionary column.

    ``factors`` is a sorted tuple of ``(variable, derivative, power)``
    triples, e.g. ``(("u", "", 2), ("u", "x", 1))`` for ``u^2*u_x``.
    """

    factors: tuple = ()

    def __post_init__(self):
        merged = {}
        for var, deriv, power in self.factors:
            if power < 1:
                raise DictionaryError(f"non-positive power in factor {var}_{deriv}")
            merged[(var, deriv)] = merged.get((var, deriv), 0) + int(power)
        canon = tuple(sorted(((v, d, p) for (v, d), p in merged.items()),
                             key=lambda f: (len(f[1]), f[1], f[0])))
        object.__setattr__(self, "factors", canon)

    @classmethod
    def parse(cls, text):
        """Parse a canonical string such as ``"u*v^2"`` or ``"u_xx"``."""
        text = text.strip().replace(" ", "")
        if text == "1":
            return cls(())
        factors = []
        for part in text.split("*"):
            m = _FACTOR_RE.match(part)
            if m is None:
                raise DictionaryError(f"cannot parse term factor {part!r} in {text!r}")
            var, deriv, power = m.group(1), m.group(2) or "", int(m.group(3) or 1)
            factors.append((var, deriv, power))
        return cls(tuple(factors))

    @classmethod
    def monomial(cls, **powers):
        return cls(tuple((v, "", p) for v, p in powers.items() if p))

    def __str__(self):
        if not self.factors:
            return "1"
        parts = []
        for var, deriv, power in self.factors:
            s = var + (f"_{deriv}" if deriv else "")
            parts.append(s + (f"^{power}" if power > 1 else ""))
        return "*".join(parts)

    @property
    def degree(self):
        return sum(p for _, _, p in self.factors)

    @property
    def derivative_order(self):
        return max((len(d) for _, d, _ in self.factors), default=0)

    @property
    def variables(self):
        return frozenset(v for v, _, _ in self.factors)

    def rename(self, mapping):
        return TermLabel(tuple((mapping.get(v, v), d, p) for v, d, p in self.factors))


def swap_image(label, swap):
    """Exchange the roles of two species in ``label``.

    >>> str(swap_image(TermLabel.parse("u*v^2"), ("u", "v")))
    'u^2*v'
    """
    a, b = swap
    return label.rename({a: b, b: a})


def _lex_key(label, basis):
    exps = dict(((v, d), p) for v, d, p in label.factors)
    known = tuple(-exps.pop(f, 0) for f in basis)
    # factors outside the basis sort last, deterministically by name
    rest = tuple(sorted(exps.items()))
    return (label.degree, known, rest)


def graded_lex_sort(labels, variables=()):
    """Sort labels by total degree, then lexicographically on exponents.

    ``variables`` fixes the variable order; derivative factors follow the
    plain variables, ordered by derivative order.
    """
    labels = list(labels)
    variables = list(variables)
    for lab in labels:
        for v in sorted(lab.variables):
            if v not in variables:
                variables.append(v)
    derivs = sorted({d for lab in labels for _, d, _ in lab.factors if d},
                    key=lambda d: (len(d), d))
    basis = [(v, "") for v in variables]
    basis += [(v, d) for d in derivs for v in variables]
    return sorted(labels, key=lambda lab: _lex_key(lab, basis))


@dataclass
class Dictionary:
    """Design matrix with one :class:`TermLabel` per column.

    ``block_map[j]`` is the block owning column ``j`` and ``row_blocks[i]``
    the block owning row ``i``; a single-block dictionary has both all zero.
    """

    matrix: np.ndarray
    labels: list
    block_map: np.ndarray = None
    row_blocks: np.ndarray = None
    block_names: list = field(default_factory=lambda: ["0"])

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        if self.matrix.ndim != 2:
            raise DictionaryError("dictionary matrix must be 2-D")
        n, p = self.matrix.shape
        if len(self.labels) != p:
            raise DictionaryError(f"{len(self.labels)} labels for {p} columns")
        if self.block_map is None:
            self.block_map = np.zeros(p, dtype=int)
        if self.row_blocks is None:
            self.row_blocks = np.zeros(n, dtype=int)
        self.block_map = np.asarray(self.block_map, dtype=int)
        self.row_blocks = np.asarray(self.row_blocks, dtype=int)
        for b in np.unique(self.block_map):
            names = [str(l) for l, m in zip(self.labels, self.block_map) if m == b]
            if len(set(names)) != len(names):
                raise DictionaryError(f"duplicate labels inside block {b}")

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def column_names(self):
        """Labels qualified by block name, e.g. ``x2:x2^2``."""
        if len(self.block_names) == 1:
            return [str(l) for l in self.labels]
        return [f"{self.block_names[b]}:{l}" for b, l in zip(self.block_map, self.labels)]

    def column_index(self, label, block=0):
        """Index of ``label`` (TermLabel or string) inside ``block`` (index or name)."""
        if isinstance(label, str):
            label = TermLabel.parse(label)
        if isinstance(block, str):
            block = self.block_names.index(block)
        for j, (lab, b) in enumerate(zip(self.labels, self.block_map)):
            if b == block and lab == label:
                return j
        raise DictionaryError(f"label {label} not found in block {self.block_names[block]}")

    def block_columns(self, block):
        return np.flatnonzero(self.block_map == block)

    def to_csv(self, path):
        header = ",".join(self.column_names)
        np.savetxt(path, self.matrix, delimiter=",", header=header, comments="", fmt="%.17g")


def evaluate_terms(labels, values, n=None):
    """Evaluate ``labels`` pointwise.

    ``values`` maps ``(variable, derivative)`` to a 1-D array; a bare
    variable name is accepted for the underived entry.
    """
    lookup = {}
    for k, v in values.items():
        key = (k, "") if isinstance(k, str) else tuple(k)
        lookup[key] = np.asarray(v, dtype=float).ravel()
    if n is None:
        n = len(next(iter(lookup.values())))
    for key, v in lookup.items():
        if len(v) != n:
            raise DictionaryError(f"length mismatch for {key}: {len(v)} != {n}")
    cols = np.empty((n, len(labels)))
    for j, lab in enumerate(labels):
        col = np.ones(n)
        for var, deriv, power in lab.factors:
            try:
                col = col * lookup[(var, deriv)] ** power
            except KeyError:
                raise DictionaryError(f"no data for factor {var}_{deriv} of {lab}") from None
        cols[:, j] = col
    return cols


def monomial_features(states, max_degree, exogenous=None):
    """All monomials of total degree ``1..max_degree`` in ``states``.

    Parameters
    ----------
    states : dict
        Ordered mapping of variable name to sample vector.
    max_degree : int
    exogenous : dict, optional
        Extra factors (e.g. an external signal) that may enter each
        monomial at most linearly.
    """
    if max_degree < 1:
        raise DictionaryError("max_degree must be >= 1")
    names = list(states)
    exo = dict(exogenous or {})
    lengths = {len(np.ravel(v)) for v in list(states.values()) + list(exo.values())}
    if len(lengths) != 1:
        raise DictionaryError(f"state vectors differ in length: {sorted(lengths)}")
    labels = []
    for deg in range(1, max_degree + 1):
        for combo in combinations_with_replacement(names, deg):
            labels.append(TermLabel(tuple((v, "", 1) for v in combo)))
    for e in exo:
        labels.append(TermLabel(((e, "", 1),)))
        for deg in range(1, max_degree):
            for combo in combinations_with_replacement(names, deg):
                labels.append(TermLabel(tuple((v, "", 1) for v in combo) + ((e, "", 1),)))
    labels = graded_lex_sort(labels, names + list(exo))
    values = {**states, **exo}
    return Dictionary(evaluate_terms(labels, values), labels)


def derivative_features(field, max_order=2, spec=None, points=None, species=None):
    """Pure spatial-derivative columns (``u_x``, ``u_xx``, ``u_y``, ...).

    ``field.data[s]`` has shape ``(nt, *spatial)``; ``points`` is an
    optional ``(k, ndim + 1)`` integer array of ``(t, x[, y])`` sample
    indices. Derivatives use local polynomial fits along each spatial axis
    (periodic wrap).
    """
    from .preprocess import DerivativeSpec, polyfit_derivative

    spec = spec or DerivativeSpec(window=9, degree=4)
    names = list(species or field.data)
    labels, columns = [], []
    for s in names:
        arr = np.asarray(field.data[s], dtype=float)
        for order in range(1, max_order + 1):
            for ax_i, ax in enumerate(field.axes):
                n_ax = arr.shape[ax_i + 1]
                if n_ax < spec.window:
                    raise DictionaryError(
                        f"grid axis {ax} has {n_ax} points, fewer than window {spec.window}")
                d = polyfit_derivative(arr, field.spacing[ax], spec, order,
                                       axis=ax_i + 1, periodic=True)
                labels.append(TermLabel(((s, ax * order, 1),)))
                columns.append(d[tuple(points.T)] if points is not None else d.ravel())
    mat = np.column_stack(columns) if columns else np.empty((0, 0))
    order_idx = [labels.index(l) for l in graded_lex_sort(labels, names)]
    return Dictionary(mat[:, order_idx], [labels[i] for i in order_idx])


def stack_blocks(blocks, targets, block_names=None, uniform=False):
    """Block-diagonal composite of per-block dictionaries.

    Returns the composite :class:`Dictionary` and the concatenated target.
    With ``uniform=True`` every block must have the same width, so column
    ``k * p + l`` is term ``l`` of block ``k``.
    """
    if len(blocks) != len(targets):
        raise DictionaryError("one target per block required")
    if not blocks:
        raise DictionaryError("no blocks to stack")
    widths = [b.matrix.shape[1] for b in blocks]
    if uniform and len(set(widths)) != 1:
        raise DictionaryError(f"uniform stacking requested but block widths differ: {widths}")
    for k, (b, t) in enumerate(zip(blocks, targets)):
        if b.matrix.shape[0] != len(t):
            raise DictionaryError(f"block {k}: {b.matrix.shape[0]} rows but target length {len(t)}")
    n = sum(b.matrix.shape[0] for b in blocks)
    p = sum(widths)
    mat = np.zeros((n, p))
    labels, block_map, row_blocks = [], [], []
    r = c = 0
    for k, b in enumerate(blocks):
        nb, pb = b.matrix.shape
        mat[r:r + nb, c:c + pb] = b.matrix
        labels += list(b.labels)
        block_map += [k] * pb
        row_blocks += [k] * nb
        r += nb
        c += pb
    names = list(block_names) if block_names else [str(k) for k in range(len(blocks))]
    target = np.concatenate([np.asarray(t, dtype=float).ravel() for t in targets])
    return Dictionary(mat, labels, np.array(block_map), np.array(row_blocks), names), target


# Preset rosters; these contain the true terms plus plausible confounders.

def _jak_stat_roster():
    xs = ["x1", "x2", "x3", "x4"]
    labs = [TermLabel.monomial(**{x: 1}) for x in xs]
    for a, b in combinations_with_replacement(xs, 2):
        labs.append(TermLabel(((a, "", 1), (b, "", 1))))
    labs += [TermLabel(((x, "", 1), ("c", "", 1))) for x in xs]
    labs.append(TermLabel.monomial(x2=3))
    return graded_lex_sort(labs, xs + ["c"])


JAK_STAT_ROSTER = _jak_stat_roster()


def advection_roster(species="u"):
    """15 candidate operators for one species of the 1-D transport model."""
    s = species
    texts = [f"{s}", f"{s}^2", f"{s}^3", f"{s}_x", f"{s}_xx",
             f"{s}*{s}_x", f"{s}^2*{s}_x", f"{s}^3*{s}_x",
             f"{s}*{s}_xx", f"{s}^2*{s}_xx", f"{s}^3*{s}_xx",
             f"{s}_x^2", f"{s}_x*{s}_xx", f"{s}_xx^2", f"{s}*{s}_x*{s}_xx"]
    return graded_lex_sort([TermLabel.parse(t) for t in texts], [s])


def reaction_diffusion_roster(species=("u", "v")):
    """18 candidate terms shared by both species of the 2-D model."""
    u, v = species
    texts = ["1", u, v, f"{u}^2", f"{u}*{v}", f"{v}^2",
             f"{u}^3", f"{u}^2*{v}", f"{u}*{v}^2", f"{v}^3",
             f"{u}_x", f"{u}_y", f"{v}_x", f"{v}_y",
             f"{u}_xx", f"{u}_yy", f"{v}_xx", f"{v}_yy"]
    return graded_lex_sort([TermLabel.parse(t) for t in texts], [u, v])

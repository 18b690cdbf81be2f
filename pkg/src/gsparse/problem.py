"""The regression problem handed to the solver, and its on-disk form."""

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .dictionary import Dictionary, TermLabel
from .errors import PreprocessError
from .groups import GroupStructure, singleton_groups

__all__ = ["RegressionProblem"]


@dataclass
class RegressionProblem:
    """Target ``U_t``, dictionary ``Theta`` and the group partition of its columns."""

    dictionary: Dictionary
    target: np.ndarray
    groups: GroupStructure = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.target = np.asarray(self.target, dtype=float).ravel()
        n, p = self.dictionary.shape
        if len(self.target) != n:
            raise PreprocessError(f"target length {len(self.target)} != {n} dictionary rows")
        if self.groups is None:
            self.groups = singleton_groups(self.dictionary)
        if self.groups.p != p:
            raise PreprocessError(f"groups cover {self.groups.p} columns, dictionary has {p}")

    @property
    def theta(self):
        return self.dictionary.matrix

    @property
    def n(self):
        return self.dictionary.shape[0]

    @property
    def p(self):
        return self.dictionary.shape[1]

    @property
    def column_names(self):
        return self.dictionary.column_names

    def with_groups(self, groups):
        return RegressionProblem(self.dictionary, self.target, groups, dict(self.metadata))

    def take_rows(self, rows):
        """Problem restricted to ``rows`` (kept in the given order)."""
        d = self.dictionary
        rows = np.asarray(rows, dtype=int)
        sub = Dictionary(d.matrix[rows], d.labels, d.block_map, d.row_blocks[rows], d.block_names)
        return RegressionProblem(sub, self.target[rows], self.groups, self.metadata)

    def balanced(self):
        """Rows of every block divided by the norm of that block's target.

        Each block's least-squares fit is unchanged (both sides share the
        factor), but blocks with small time derivatives no longer drown in
        the thresholds set by the largest one. Blocks with a zero target
        keep weight 1. The weights are stored under ``block_weights``.
        """
        d = self.dictionary
        w = np.ones(self.n)
        weights = []
        for b in range(len(d.block_names)):
            rows = d.row_blocks == b
            nrm = float(np.linalg.norm(self.target[rows]))
            wb = 1.0 / nrm if nrm > 0 else 1.0
            w[rows] = wb
            weights.append(wb)
        sub = Dictionary(d.matrix * w[:, None], d.labels, d.block_map, d.row_blocks, d.block_names)
        meta = dict(self.metadata, block_weights=weights)
        return RegressionProblem(sub, self.target * w, self.groups, meta)

    def save(self, directory):
        """Write ``matrix.csv``, ``target.csv``, ``groups.json``, ``metadata.json``."""
        os.makedirs(directory, exist_ok=True)
        self.dictionary.to_csv(os.path.join(directory, "matrix.csv"))
        np.savetxt(os.path.join(directory, "target.csv"), self.target, delimiter=",",
                   header="target", comments="", fmt="%.17g")
        self.groups.to_json(os.path.join(directory, "groups.json"))
        meta = dict(self.metadata)
        meta["labels"] = [str(l) for l in self.dictionary.labels]
        meta["block_map"] = self.dictionary.block_map.tolist()
        meta["row_blocks"] = self.dictionary.row_blocks.tolist()
        meta["block_names"] = list(self.dictionary.block_names)
        with open(os.path.join(directory, "metadata.json"), "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, directory):
        with open(os.path.join(directory, "metadata.json"), encoding="utf-8") as fh:
            meta = json.load(fh)
        mat = np.loadtxt(os.path.join(directory, "matrix.csv"), delimiter=",", skiprows=1, ndmin=2)
        target = np.loadtxt(os.path.join(directory, "target.csv"), delimiter=",", skiprows=1, ndmin=1)
        labels = [TermLabel.parse(s) for s in meta.pop("labels")]
        d = Dictionary(mat, labels, np.array(meta.pop("block_map")),
                       np.array(meta.pop("row_blocks")), meta.pop("block_names"))
        groups = GroupStructure.from_json(os.path.join(directory, "groups.json"))
        return cls(d, target, groups, meta)

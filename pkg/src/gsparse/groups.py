"""Non-overlapping coefficient groups that encode modelling priors.

Indices are 0-based in memory and 1-based in the JSON form
``{"p": n, "groups": [{"name": s, "indices": [...]}]}``.
"""

import json
from dataclasses import dataclass

import numpy as np

from .dictionary import TermLabel, swap_image
from .errors import GroupError

__all__ = [
    "Group",
    "GroupStructure",
    "validate",
    "conservation_groups",
    "spatial_groups",
    "union_groups",
    "symmetry_groups",
    "singleton_groups",
]


@dataclass(frozen=True)
class Group:
    name: str
    indices: tuple

    @property
    def size(self):
        return len(self.indices)


def validate(p, groups, complete=False):
    """List the problems of a candidate partition of ``range(p)``.

    ``groups`` is a sequence of ``(name, indices)`` pairs (0-based). An
    empty list means the partition is valid. Uncovered columns are only a
    violation when ``complete`` is False (strict mode).
    """
    out = []
    owner = {}
    names = set()
    for name, idx in groups:
        if name in names:
            out.append(f"duplicate group name {name!r}")
        names.add(name)
        if len(idx) == 0:
            out.append(f"group {name!r} is empty")
        for i in idx:
            if not 0 <= i < p:
                out.append(f"group {name!r}: index {i + 1} out of range 1..{p}")
            elif i in owner and owner[i] != name:
                out.append(f"index {i + 1} in both {owner[i]!r} and {name!r}")
            elif i in owner:
                out.append(f"index {i + 1} repeated in group {name!r}")
            else:
                owner[i] = name
    if not complete:
        gaps = [i + 1 for i in range(p) if i not in owner]
        if gaps:
            out.append(f"indices not covered by any group: {gaps}")
    return out


class GroupStructure:
    """A validated partition of the dictionary columns into named groups.

    Columns not mentioned in ``groups`` become singleton groups named after
    ``column_names`` (unless ``complete=False``, which makes gaps an error).
    Groups are kept sorted by their smallest column index.
    """

    def __init__(self, p, groups=(), column_names=None, complete=True):
        groups = [(str(n), [int(i) for i in idx]) for n, idx in groups]
        problems = validate(p, groups, complete=complete)
        if problems:
            raise GroupError("invalid group structure: " + "; ".join(problems), problems)
        covered = {i for _, idx in groups for i in idx}
        names = list(column_names) if column_names is not None else [str(j + 1) for j in range(p)]
        taken = {n for n, _ in groups}
        for j in range(p):
            if j not in covered:
                name = names[j] if names[j] not in taken else f"{names[j]}#{j + 1}"
                groups.append((name, [j]))
                taken.add(name)
        self.p = int(p)
        self.groups = sorted((Group(n, tuple(sorted(idx))) for n, idx in groups),
                             key=lambda g: g.indices[0])
        self._member = np.empty(self.p, dtype=int)
        for k, g in enumerate(self.groups):
            self._member[list(g.indices)] = k

    def __len__(self):
        return len(self.groups)

    def __iter__(self):
        return iter(self.groups)

    def __eq__(self, other):
        return isinstance(other, GroupStructure) and self.p == other.p and self.groups == other.groups

    def __repr__(self):
        return f"GroupStructure(p={self.p}, m={len(self.groups)})"

    @property
    def names(self):
        return [g.name for g in self.groups]

    @property
    def sizes(self):
        return np.array([g.size for g in self.groups])

    @property
    def membership(self):
        """``membership[j]`` is the position of the group containing column ``j``."""
        return self._member.copy()

    def index_of(self, name):
        for k, g in enumerate(self.groups):
            if g.name == name:
                return k
        raise KeyError(name)

    def group(self, name):
        return self.groups[self.index_of(name)]

    def groups_touching(self, columns):
        """Names of the groups containing any of ``columns``."""
        return {self.groups[self._member[j]].name for j in columns}

    def tied_size(self):
        """Size of the largest group; 1 for an all-singleton structure."""
        return int(self.sizes.max()) if self.groups else 1

    def to_dict(self):
        return {"p": self.p,
                "groups": [{"name": g.name, "indices": [i + 1 for i in g.indices]}
                           for g in self.groups]}

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=1)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text

    @classmethod
    def from_dict(cls, d, complete=True):
        try:
            p = int(d["p"])
            groups = [(g["name"], [int(i) - 1 for i in g["indices"]]) for g in d["groups"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise GroupError(f"malformed group JSON: {exc!r}", [repr(exc)]) from None
        return cls(p, groups, complete=complete)

    @classmethod
    def from_json(cls, text_or_path, complete=True):
        text = str(text_or_path)
        if not text.lstrip().startswith("{"):
            with open(text, encoding="utf-8") as fh:
                text = fh.read()
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise GroupError(f"malformed group JSON: {exc}", [str(exc)]) from None
        return cls.from_dict(d, complete=complete)


def singleton_groups(dictionary):
    return GroupStructure(dictionary.shape[1], (), dictionary.column_names)


def conservation_groups(dictionary, pairs):
    """Tie one term across two blocks for every conserved exchange.

    ``pairs`` holds ``(label, block_a, block_b)`` or
    ``(name, label, block_a, block_b)`` tuples; blocks are names or indices.
    """
    groups = []
    for pair in pairs:
        if len(pair) == 4:
            name, label, a, b = pair
        else:
            label, a, b = pair
            name = None
        ia = dictionary.column_index(label, a)
        ib = dictionary.column_index(label, b)
        if name is None:
            bn = dictionary.block_names
            name = f"{TermLabel.parse(label) if isinstance(label, str) else label}" \
                   f"{{{bn[dictionary.block_map[ia]]},{bn[dictionary.block_map[ib]]}}}"
        groups.append((name, [ia, ib]))
    return GroupStructure(dictionary.shape[1], groups, dictionary.column_names)


def spatial_groups(p, p_g, labels=None, prefix=""):
    """Tie term ``l`` of every location block: ``g_l = {l + k p}``.

    Covers ``p * p_g`` columns laid out as ``p_g`` consecutive blocks of
    width ``p``.
    """
    if p < 1 or p_g < 1:
        raise GroupError("p and p_g must be positive")
    names = [str(l) for l in labels] if labels is not None else [str(l + 1) for l in range(p)]
    if len(names) != p:
        raise GroupError(f"{len(names)} labels for p = {p}")
    groups = [(prefix + names[l], [l + k * p for k in range(p_g)]) for l in range(p)]
    return GroupStructure(p * p_g, groups)


def union_groups(a, b, pairing=()):
    """Concatenate two structures (``b`` shifted past ``a``) and merge pairs.

    ``pairing`` lists ``(name_in_a, name_in_b)``; each pair becomes one
    group named ``"a|b"``. Unpaired groups are carried over unchanged.
    """
    off = a.p
    used_a, used_b = set(), set()
    groups = []
    for na, nb in pairing:
        ga, gb = a.group(na), b.group(nb)
        if na in used_a or nb in used_b:
            raise GroupError(f"group paired twice in ({na!r}, {nb!r})")
        used_a.add(na)
        used_b.add(nb)
        groups.append((f"{na}|{nb}", list(ga.indices) + [i + off for i in gb.indices]))
    groups += [(g.name, list(g.indices)) for g in a if g.name not in used_a]
    groups += [(g.name, [i + off for i in g.indices]) for g in b if g.name not in used_b]
    return GroupStructure(a.p + b.p, groups, complete=False)


def symmetry_groups(dict_u, dict_v, swap=("u", "v")):
    """Pair every column of ``dict_u`` with its species-swapped image in ``dict_v``.

    The result covers the ``p_u + p_v`` columns of the stacked two-block
    dictionary; ``dict_v``'s columns come after ``dict_u``'s.
    """
    pu, pv = dict_u.shape[1], dict_v.shape[1]
    v_index = {lab: j for j, lab in enumerate(dict_v.labels)}
    images = [swap_image(lab, swap) for lab in dict_u.labels]
    if set(images) != set(v_index) or pu != pv:
        missing = sorted(str(l) for l in set(images) - set(v_index))
        raise GroupError(f"second dictionary is not the swap image of the first; missing {missing}",
                         missing)
    a, b = swap
    groups = [(f"{a}:{lab}|{b}:{img}", [i, pu + v_index[img]])
              for i, (lab, img) in enumerate(zip(dict_u.labels, images))]
    return GroupStructure(pu + pv, groups, complete=False)

"""Per-instance class distributions and their node masses."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hierarchy import Hierarchy, HierarchyError, bits

EPS = 1e-9


class ProbabilityError(ValueError):
    pass


class ProbabilityView:
    """One instance's distribution over the classes of a hierarchy.

    Node masses are computed eagerly (exact ``math.fsum`` over leaf masses),
    so a view is read-only after construction and safe to share.

    ``order`` lists class ids by decreasing mass, ties by increasing id;
    every rank-based quantity downstream uses this order.
    """

    __slots__ = ("hierarchy", "leaf_mass", "order", "rank", "node_masses", "_masses_list")

    def __init__(self, h: Hierarchy, leaf_mass, *, atol: float = EPS):
        mass = np.array(leaf_mass, dtype=np.float64).reshape(-1)
        if mass.shape[0] != h.K:
            raise ProbabilityError(f"expected {h.K} class masses, got {mass.shape[0]}")
        if not np.all(np.isfinite(mass)) or np.any(mass < 0) or np.any(mass > 1):
            raise ProbabilityError("class masses must lie in [0, 1]")
        total = math.fsum(mass)
        if abs(total - 1.0) > atol:
            raise ProbabilityError(f"class masses sum to {total!r}, not 1")
        mass.setflags(write=False)
        self.hierarchy = h
        self.leaf_mass = mass
        self._masses_list = mass.tolist()
        order = np.lexsort((np.arange(h.K), -mass))
        order.setflags(write=False)
        self.order = order
        rank = np.empty(h.K, dtype=np.int64)
        rank[order] = np.arange(h.K)
        rank.setflags(write=False)
        self.rank = rank
        ml = self._masses_list
        self.node_masses = tuple(math.fsum(ml[c] for c in cs) for cs in h.classes)

    def mass_of_mask(self, mask: int) -> float:
        ml = self._masses_list
        return math.fsum(ml[c] for c in bits(mask))

    def mass_of(self, classes) -> float:
        ml = self._masses_list
        return math.fsum(ml[c] for c in sorted(classes))


@dataclass(frozen=True)
class BranchTable:
    """Conditional mass of every node given its parent; the root entry is 1."""

    hierarchy: Hierarchy
    branch: tuple[float, ...]


def node_mass(h: Hierarchy, p: ProbabilityView, v: int) -> float:
    h.check_node(v)
    return p.node_masses[v]


def mode(p: ProbabilityView) -> int:
    return int(p.order[0])


def to_branch_table(h: Hierarchy, p: ProbabilityView) -> BranchTable:
    branch = [1.0] * h.M
    for v in range(h.M):
        kids = h.children[v]
        pm = p.node_masses[v]
        for c in kids:
            branch[c] = p.node_masses[c] / pm if pm > 0 else 1.0 / len(kids)
    return BranchTable(h, tuple(branch))


def from_branch_table(h: Hierarchy, b: BranchTable, *, atol: float = EPS) -> ProbabilityView:
    """Leaf masses as products of branch masses along each root path."""
    if len(b.branch) != h.M:
        raise ProbabilityError(f"branch table has {len(b.branch)} entries, hierarchy has {h.M} nodes")
    for v in range(h.M):
        kids = h.children[v]
        if kids:
            s = math.fsum(b.branch[c] for c in kids)
            if abs(s - 1.0) > atol:
                raise ProbabilityError(f"branches below node {h.names[v]!r} sum to {s!r}")
    mass = [1.0] * h.M
    for v in range(1, h.M):  # BFS ids: parents come first
        mass[v] = mass[h.parent[v]] * b.branch[v]
    return ProbabilityView(h, [mass[leaf] for leaf in h.leaf_of_class], atol=max(atol, 1e-9))


def views_from_matrix(h: Hierarchy, probs) -> list[ProbabilityView]:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[1] != h.K:
        raise ProbabilityError(f"probability matrix must be N x {h.K}, got {probs.shape}")
    return [ProbabilityView(h, row) for row in probs]


def align_columns(h: Hierarchy, header: list[str]) -> list[int]:
    """Column index of each class, matching CSV header names to leaf names."""
    pos = {name: i for i, name in enumerate(header)}
    if len(pos) != len(header):
        raise HierarchyError("duplicate class names in probability header")
    missing = [n for n in h.class_names if n not in pos]
    extra = sorted(set(header) - set(h.class_names))
    if missing or extra:
        raise HierarchyError(f"probability columns do not match hierarchy leaves (missing {missing}, unknown {extra})")
    return [pos[n] for n in h.class_names]


def class_ids(h: Hierarchy, labels: list[str]) -> list[int]:
    ids = []
    for i, name in enumerate(labels):
        v = h.node_of_name.get(name)
        if v is None or v not in h.class_of_leaf:
            raise HierarchyError(f"label {name!r} on line {i + 1} is not a leaf of the hierarchy")
        ids.append(h.class_of_leaf[v])
    return ids

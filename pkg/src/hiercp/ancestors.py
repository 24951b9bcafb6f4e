"""Bounded-complexity common ancestors of the top-ranked classes.

For a set ``omega`` of classes and a budget ``r``, find the class set
``Y ⊇ omega`` of representation complexity at most ``r`` minimizing
``|Y| - P(Y|x)``. Solved exactly by a bottom-up dynamic program over the
hierarchy: each node stores its best cover for every budget ``b <= r``,
and an internal node combines its children's covers over all compositions
of ``b`` among the children that hold ``omega`` classes.
"""

from __future__ import annotations

import itertools
import math
import weakref
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .hierarchy import Hierarchy, NodeSet, bits, cover_of_mask
from .probmodel import ProbabilityView

MAX_BUDGET = 16
MAX_ORACLE_NODES = 25
# costs closer than this are ties, resolved by the lexicographically smaller class set
TIE_TOL = 1e-12


@dataclass(frozen=True)
class AncestorSolution:
    mask: int
    classes: tuple[int, ...]
    cover: NodeSet
    mass: float
    cost: float

    @property
    def size(self) -> int:
        return len(self.classes)

    @property
    def complexity(self) -> int:
        return len(self.cover)


def _solution(h: Hierarchy, p: ProbabilityView, mask: int) -> AncestorSolution:
    classes = bits(mask)
    mass = p.mass_of_mask(mask)
    return AncestorSolution(mask, classes, cover_of_mask(h, mask), mass, len(classes) - mass)


def _better(cost_a: float, mask_a: int, cost_b: float, mask_b: int) -> bool:
    if cost_a < cost_b - TIE_TOL:
        return True
    if cost_a > cost_b + TIE_TOL:
        return False
    return bits(mask_a) < bits(mask_b)


def _check_budget(h: Hierarchy, r: int) -> int:
    if not isinstance(r, (int, np.integer)) or r < 1:
        raise ValueError(f"budget r must be a positive integer, got {r!r}")
    if r > MAX_BUDGET and r < h.K:
        raise ValueError(f"budget r={r} exceeds {MAX_BUDGET} (only r >= K={h.K} is accepted above that)")
    return min(int(r), h.K)


def omega_set(p: ProbabilityView, y: int) -> frozenset[int]:
    """Classes ranked at or above ``y``."""
    return frozenset(int(c) for c in p.order[: p.rank[y] + 1])


def positive_compositions(total: int, parts: int):
    """All ordered splits of ``total`` into ``parts`` integers >= 1."""
    for cuts in itertools.combinations(range(1, total), parts - 1):
        yield tuple(b - a for a, b in zip((0,) + cuts, cuts + (total,)))


def solve_ancestors(h: Hierarchy, p: ProbabilityView, omega: Iterable[int], r: int, *, prune: bool = True) -> AncestorSolution:
    """Exact minimizer of ``|Y| - P(Y|x)`` over ``Y ⊇ omega`` with complexity ``<= r``.

    With ``prune`` a node whose omega-classes fit in the budget returns them
    directly; that set is the unique optimum because any extra class ``c``
    adds ``1 - P(c|x) > 0``. ``prune=False`` runs the plain composition DP.
    """
    wmask = h.mask_of(omega)
    if not wmask:
        raise ValueError("omega must be non-empty")
    rmax = _check_budget(h, r)
    if prune and len(cover_of_mask(h, wmask)) <= rmax:
        return _solution(h, p, wmask)
    masks, children, parent = h.masks, h.children, h.parent
    nm = p.node_masses

    marked = set()
    for c in bits(wmask):
        v = h.leaf_of_class[c]
        while v >= 0 and v not in marked:
            marked.add(v)
            v = parent[v]

    # best[v][b] = (cost, mass, mask) for budgets b = 1..rmax (index 0 unused)
    best: dict[int, list] = {}
    need: dict[int, int] = {}  # minimal cover size of omega within v
    for v in sorted(marked, reverse=True):  # BFS ids: children before parents
        mv = masks[v]
        own = (len(h.classes[v]) - nm[v], nm[v], mv)
        if not children[v] or (wmask & mv) == mv:
            need[v] = 1
            best[v] = [None] + [own] * rmax
            continue
        kids = [c for c in children[v] if c in marked]
        need[v] = sum(need[c] for c in kids)
        row = [None]
        exact = None
        for b in range(1, rmax + 1):
            if prune and need[v] <= b:
                if exact is None:
                    exact = (
                        math.fsum(best[c][rmax][0] for c in kids),
                        math.fsum(best[c][rmax][1] for c in kids),
                        sum(best[c][rmax][2] for c in kids),
                    )
                row.append(exact)
                continue
            if len(kids) > b:
                row.append(own)
                continue
            top = None
            for comp in positive_compositions(b, len(kids)):
                cost = mass = 0.0
                mask = 0
                for c, bc in zip(kids, comp):
                    cc, cm, ck = best[c][bc]
                    cost += cc
                    mass += cm
                    mask |= ck
                if top is None or _better(cost, mask, top[0], top[2]):
                    top = (cost, mass, mask)
            row.append(top)
        best[v] = row
        for c in kids:
            del best[c]

    return _solution(h, p, best[h.root][rmax][2])


_subset_cache: "weakref.WeakKeyDictionary[Hierarchy, dict[int, dict[int, int]]]" = weakref.WeakKeyDictionary()


def _disjoint_node_sets(h: Hierarchy, kmax: int) -> dict[int, int]:
    """Every union of <= kmax pairwise-disjoint nodes, mapped to the fewest nodes giving it."""
    per_h = _subset_cache.setdefault(h, {})
    if kmax in per_h:
        return per_h[kmax]
    found: dict[int, int] = {}
    masks = h.masks
    for k in range(1, kmax + 1):
        for combo in itertools.combinations(range(h.M), k):
            union = 0
            for v in combo:
                if union & masks[v]:
                    break
                union |= masks[v]
            else:
                if union not in found:
                    found[union] = k
    per_h[kmax] = found
    return found


class BruteForceAncestors:
    """Enumerates every set of at most ``r`` disjoint nodes once per (tree, view)."""

    def __init__(self, h: Hierarchy, p: ProbabilityView, r_max: int):
        if h.M > MAX_ORACLE_NODES:
            raise ValueError(f"brute force limited to {MAX_ORACLE_NODES} nodes, tree has {h.M}")
        self.h, self.p = h, p
        self.r_max = min(int(r_max), h.K)
        table = _disjoint_node_sets(h, self.r_max)
        self.masks = list(table)
        self.sizes = np.array([table[m] for m in self.masks])
        self.bitmasks = np.array(self.masks, dtype=np.int64)
        self.costs = np.array([m.bit_count() - p.mass_of_mask(m) for m in self.masks])

    def solve(self, omega: Iterable[int], r: int) -> AncestorSolution:
        wmask = self.h.mask_of(omega)
        if not wmask:
            raise ValueError("omega must be non-empty")
        if r < 1:
            raise ValueError(f"budget r must be a positive integer, got {r!r}")
        r = min(int(r), self.h.K)
        if r > self.r_max:
            raise ValueError(f"oracle was built for r <= {self.r_max}")
        ok = ((self.bitmasks & wmask) == wmask) & (self.sizes <= r)
        idx = np.flatnonzero(ok)
        lowest = self.costs[idx].min()
        tied = idx[self.costs[idx] <= lowest + TIE_TOL]
        mask = min((self.masks[i] for i in tied), key=bits)
        return _solution(self.h, self.p, mask)


def bruteforce_ancestors(h: Hierarchy, p: ProbabilityView, omega: Iterable[int], r: int) -> AncestorSolution:
    """Independent oracle for :func:`solve_ancestors` by exhaustive enumeration."""
    return BruteForceAncestors(h, p, r).solve(omega, r)


def ancestor_sequence(h: Hierarchy, p: ProbabilityView, r: int, *, nested: bool = True) -> list[AncestorSolution]:
    """Distinct common-ancestor sets met while walking the classes by rank.

    A class already inside the last kept set is skipped; a new solution is
    kept only when its size differs from the last one. Ends with the full
    class set.

    The plain optimum for a longer prefix need not contain the optimum for a
    shorter one: it may drop low-mass classes the shorter solution absorbed.
    With ``nested`` (default) each step therefore also requires the previous
    set, which leaves every already-nested step unchanged and makes the
    sequence nested by construction. ``nested=False`` gives the plain walk.
    """
    _check_budget(h, r)
    out: list[AncestorSolution] = []
    prev = 0
    top = 0
    for y in p.order.tolist():
        top |= 1 << y
        if prev >> y & 1:
            continue
        need = top | prev if nested else top
        sol = solve_ancestors(h, p, bits(need), r)
        if sol.mask.bit_count() != prev.bit_count():
            out.append(sol)
            prev = sol.mask
    return out

"""Immutable class hierarchy: a rooted tree whose leaves are the classes.

Node ids are assigned breadth-first (root = 0); class ids follow the
depth-first order of the leaves in the source document. Class sets are
handled internally as Python int bitmasks (bit ``c`` set <=> class ``c``).
"""

from __future__ import annotations

import json
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

NodeSet = tuple[int, ...]


class HierarchyError(ValueError):
    """Raised for malformed hierarchy documents or invalid node/class ids."""


@dataclass(frozen=True, eq=False)
class Hierarchy:
    """Rooted tree over ``K`` classes with ``M`` nodes.

    Build it with :func:`parse_hierarchy` or :meth:`Hierarchy.from_nested`
    rather than calling the constructor directly.
    """

    names: tuple[str, ...]
    parent: tuple[int, ...]
    children: tuple[tuple[int, ...], ...]
    leaf_of_class: tuple[int, ...]

    class_of_leaf: dict[int, int] = field(init=False, repr=False)
    masks: tuple[int, ...] = field(init=False, repr=False)
    classes: tuple[tuple[int, ...], ...] = field(init=False, repr=False)
    depth: tuple[int, ...] = field(init=False, repr=False)
    node_of_name: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        M = len(self.names)
        if not (len(self.parent) == len(self.children) == M):
            raise HierarchyError("names, parent and children must have equal length")
        roots = [v for v in range(M) if self.parent[v] < 0]
        if roots != [0]:
            raise HierarchyError(f"node 0 must be the unique root, found roots {roots}")
        for v in range(M):
            for c in self.children[v]:
                if self.parent[c] != v:
                    raise HierarchyError(f"parent/child maps disagree at node {self.names[c]!r}")
        class_of_leaf = {leaf: c for c, leaf in enumerate(self.leaf_of_class)}
        if len(class_of_leaf) != len(self.leaf_of_class):
            raise HierarchyError("two classes share a leaf")
        leaves = {v for v in range(M) if not self.children[v]}
        if leaves != set(class_of_leaf):
            raise HierarchyError("leaves and classes are not in bijection")

        depth = [0] * M
        order = []
        queue = deque([0])
        while queue:
            v = queue.popleft()
            order.append(v)
            for c in self.children[v]:
                depth[c] = depth[v] + 1
                queue.append(c)
        if len(order) != M:
            raise HierarchyError("some nodes are unreachable from the root")

        masks = [0] * M
        for v in sorted(range(M), key=lambda v: -depth[v]):
            if v in class_of_leaf:
                masks[v] = 1 << class_of_leaf[v]
            else:
                for c in self.children[v]:
                    masks[v] |= masks[c]
        object.__setattr__(self, "class_of_leaf", class_of_leaf)
        object.__setattr__(self, "masks", tuple(masks))
        object.__setattr__(self, "classes", tuple(bits(m) for m in masks))
        object.__setattr__(self, "depth", tuple(depth))
        object.__setattr__(self, "node_of_name", {n: v for v, n in enumerate(self.names)})

    @property
    def K(self) -> int:
        return len(self.leaf_of_class)

    @property
    def M(self) -> int:
        return len(self.names)

    @property
    def root(self) -> int:
        return 0

    @property
    def full_mask(self) -> int:
        return self.masks[0]

    @property
    def class_names(self) -> list[str]:
        return [self.names[leaf] for leaf in self.leaf_of_class]

    def is_leaf(self, v: int) -> bool:
        return not self.children[v]

    def check_node(self, v: int) -> None:
        if not (isinstance(v, (int, np.integer)) and 0 <= v < self.M):
            raise HierarchyError(f"invalid node id {v!r} (M={self.M})")

    def mask_of(self, classes: Iterable[int]) -> int:
        mask = 0
        for c in classes:
            if not 0 <= c < self.K:
                raise HierarchyError(f"invalid class id {c!r} (K={self.K})")
            mask |= 1 << c
        return mask

    @classmethod
    def from_nested(cls, doc: dict) -> "Hierarchy":
        """Build from ``{"name": ..., "children": [...]}`` objects."""
        names: list[str] = []
        parent: list[int] = []
        children: list[list[int]] = []
        leaf_names: dict[str, str] = {}

        def check(node, path):
            if not isinstance(node, dict) or "name" not in node:
                raise HierarchyError(f"node at {path or '/'} needs a 'name' field")
            name = str(node["name"])
            here = f"{path}/{name}"
            kids = node.get("children")
            if kids is None:
                if name in leaf_names:
                    raise HierarchyError(f"duplicate leaf name {name!r} at {here} (also at {leaf_names[name]})")
                leaf_names[name] = here
                return
            if not isinstance(kids, list) or not kids:
                raise HierarchyError(f"internal node {here} has no children")
            if len(kids) == 1:
                warnings.warn(f"internal node {here} has a single child", stacklevel=3)
            for k in kids:
                check(k, here)

        check(doc, "")

        # BFS ids; leaves collected depth-first for class ids
        queue = deque([(doc, -1)])
        while queue:
            node, pa = queue.popleft()
            v = len(names)
            names.append(str(node["name"]))
            parent.append(pa)
            children.append([])
            if pa >= 0:
                children[pa].append(v)
            for k in node.get("children") or ():
                queue.append((k, v))

        leaf_of_class: list[int] = []

        def dfs(v):
            if not children[v]:
                leaf_of_class.append(v)
            for c in children[v]:
                dfs(c)

        dfs(0)
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise HierarchyError(f"node names must be unique, repeated: {dupes}")
        return cls(tuple(names), tuple(parent), tuple(tuple(c) for c in children), tuple(leaf_of_class))

    def to_nested(self, v: int = 0) -> dict:
        if self.is_leaf(v):
            return {"name": self.names[v]}
        return {"name": self.names[v], "children": [self.to_nested(c) for c in self.children[v]]}


def bits(mask: int) -> tuple[int, ...]:
    """Sorted class ids of a bitmask."""
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return tuple(out)


def parse_hierarchy(document: str | dict) -> Hierarchy:
    """Parse a JSON hierarchy document (or an already-decoded object)."""
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise HierarchyError(f"hierarchy is not valid JSON: {exc}") from exc
    try:
        return Hierarchy.from_nested(document)
    except RecursionError as exc:
        raise HierarchyError("hierarchy nesting too deep or cyclic") from exc


def balanced_tree(K: int, arity: int = 2, prefix: str = "c") -> Hierarchy:
    """Balanced tree with ``K`` leaves named ``{prefix}0..``; internal nodes ``n<i>``."""
    if K < 1 or arity < 2:
        raise HierarchyError(f"need K >= 1 and arity >= 2, got K={K}, arity={arity}")
    counter = iter(range(10**9))

    def build(lo, hi):
        if hi - lo == 1:
            return {"name": f"{prefix}{lo}"}
        parts = min(arity, hi - lo)
        cuts = [lo + (hi - lo) * i // parts for i in range(parts + 1)]
        return {"name": f"n{next(counter)}", "children": [build(a, b) for a, b in zip(cuts, cuts[1:])]}

    if K == 1:
        return Hierarchy.from_nested({"name": "root", "children": [{"name": f"{prefix}0"}]})
    return Hierarchy.from_nested(build(0, K))


def path_to_root(h: Hierarchy, v: int) -> list[int]:
    h.check_node(v)
    path = [v]
    while h.parent[v] >= 0:
        v = h.parent[v]
        path.append(v)
    return path


def cover_of_mask(h: Hierarchy, mask: int) -> NodeSet:
    """Maximal nodes whose class set lies inside ``mask``."""
    out = set()
    for c in bits(mask):
        v = h.leaf_of_class[c]
        while True:
            pa = h.parent[v]
            if pa < 0 or h.masks[pa] & ~mask:
                break
            v = pa
        out.add(v)
    return tuple(sorted(out))


def minimal_cover(h: Hierarchy, classes: Iterable[int]) -> NodeSet:
    """Smallest set of disjoint nodes whose classes union to exactly ``classes``.

    For a tree this is unique: a node belongs to it iff its class set is
    contained in ``classes`` and its parent's is not. The empty set maps to
    the empty cover.
    """
    return cover_of_mask(h, h.mask_of(classes))


def representation_complexity(h: Hierarchy, classes: Iterable[int]) -> int:
    return len(minimal_cover(h, classes))


def node_names(h: Hierarchy, nodes: Sequence[int]) -> list[str]:
    return [h.names[v] for v in nodes]


def random_tree(K: int, rng, max_arity: int = 4, min_arity: int = 2) -> Hierarchy:
    """Random tree over ``K`` leaves; every internal node has 2..max_arity children."""
    if K < 1:
        raise HierarchyError("K must be >= 1")
    counter = iter(range(10**9))

    def build(leaves):
        if len(leaves) == 1:
            return {"name": f"c{leaves[0]}"}
        arity = int(rng.integers(min_arity, min(max_arity, len(leaves)) + 1))
        cuts = sorted(rng.choice(np.arange(1, len(leaves)), size=arity - 1, replace=False).tolist())
        parts = [leaves[a:b] for a, b in zip([0] + cuts, cuts + [len(leaves)])]
        return {"name": f"n{next(counter)}", "children": [build(p) for p in parts]}

    if K == 1:
        return Hierarchy.from_nested({"name": "root", "children": [{"name": "c0"}]})
    return Hierarchy.from_nested(build(list(range(K))))

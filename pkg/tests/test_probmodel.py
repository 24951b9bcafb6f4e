import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hiercp.hierarchy import HierarchyError, parse_hierarchy, random_tree
from hiercp.probmodel import (
    BranchTable,
    ProbabilityError,
    ProbabilityView,
    align_columns,
    class_ids,
    from_branch_table,
    mode,
    node_mass,
    to_branch_table,
)

from conftest import cls, dirichlet_view, node


def test_fixture_masses(tree8, tree8_view):
    assert node_mass(tree8, tree8_view, node(tree8, "v2")) == 0.485
    assert node_mass(tree8, tree8_view, 0) == 1.0
    assert node_mass(tree8, tree8_view, node(tree8, "v4")) == 0.28
    assert mode(tree8_view) == cls(tree8, 1)[0]
    # mass order with ties broken by class id: 1, 5, 2, 4, 6, 7, 8, 3
    assert tree8_view.order.tolist() == cls(tree8, 1, 5, 2, 4, 6, 7, 8, 3)


def test_branch_of_leaf(tree8, tree8_view):
    b = to_branch_table(tree8, tree8_view)
    assert b.branch[node(tree8, "1")] == 0.15 / 0.28
    assert b.branch[0] == 1.0


def test_invalid_rows(tree8):
    with pytest.raises(ProbabilityError, match="sum"):
        ProbabilityView(tree8, [0.2] * 8)
    with pytest.raises(ProbabilityError, match="expected 8"):
        ProbabilityView(tree8, [0.5, 0.5])
    with pytest.raises(ProbabilityError):
        ProbabilityView(tree8, [-0.1, 1.1] + [0.0] * 6)
    with pytest.raises(ProbabilityError):
        ProbabilityView(tree8, [np.nan] + [0.0] * 7)


def test_view_is_read_only(tree8_view):
    with pytest.raises(ValueError):
        tree8_view.leaf_mass[0] = 0.5


def test_zero_mass_branches_are_uniform():
    h = parse_hierarchy({"name": "r", "children": [{"name": "a"}, {"name": "b"}]})
    p = ProbabilityView(h, [1.0, 0.0])
    b = to_branch_table(h, p)
    assert b.branch[1:] == (1.0, 0.0)
    h3 = parse_hierarchy({"name": "r", "children": [{"name": "a"}, {"name": "x", "children": [{"name": "b"}, {"name": "c"}]}]})
    b3 = to_branch_table(h3, ProbabilityView(h3, [1.0, 0.0, 0.0]))
    assert b3.branch[h3.node_of_name["b"]] == 0.5


def test_mode_tie_picks_smallest_class():
    h = parse_hierarchy({"name": "r", "children": [{"name": "a"}, {"name": "b"}]})
    assert mode(ProbabilityView(h, [0.5, 0.5])) == 0


def test_bad_branch_table(tree8):
    with pytest.raises(ProbabilityError, match="sum"):
        from_branch_table(tree8, BranchTable(tree8, (1.0,) + (0.4,) * 14))
    with pytest.raises(ProbabilityError):
        from_branch_table(tree8, BranchTable(tree8, (1.0,)))


def test_align_columns(tree8):
    header = [str(i) for i in range(8, 0, -1)]
    assert align_columns(tree8, header) == list(range(7, -1, -1))
    with pytest.raises(HierarchyError, match="missing"):
        align_columns(tree8, header[:-1])
    with pytest.raises(HierarchyError, match="not a leaf"):
        class_ids(tree8, ["9"])


def test_branch_roundtrip_dirichlet():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        h = random_tree(int(rng.integers(2, 12)), rng)
        p = dirichlet_view(h, rng)
        q = from_branch_table(h, to_branch_table(h, p))
        worst = max(worst, float(np.abs(q.leaf_mass - p.leaf_mass).max()))
    assert worst < 1e-9


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2**32 - 1))
def test_chain_rule(k, seed):
    rng = np.random.default_rng(seed)
    h = random_tree(k, rng)
    p = dirichlet_view(h, rng, 0.5)
    b = to_branch_table(h, p)
    for v in range(h.M):
        # node mass is the product of branch masses down its path
        prod, w = 1.0, v
        while w >= 0:
            prod *= b.branch[w]
            w = h.parent[w]
        assert math.isclose(prod, p.node_masses[v], abs_tol=1e-12)
        kids = h.children[v]
        if kids:
            assert math.isclose(math.fsum(p.node_masses[c] for c in kids), p.node_masses[v], abs_tol=1e-12)

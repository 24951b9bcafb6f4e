import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hiercp.ancestors import (
    MAX_BUDGET,
    BruteForceAncestors,
    ancestor_sequence,
    bruteforce_ancestors,
    omega_set,
    positive_compositions,
    solve_ancestors,
)
from hiercp.hierarchy import balanced_tree, bits, path_to_root, random_tree, representation_complexity
from hiercp.probmodel import ProbabilityView

from conftest import cls, dirichlet_view, node


def names(h, classes):
    return sorted(int(h.class_names[c]) for c in classes)


def test_omega_of_class_2(tree8, tree8_view):
    assert names(tree8, omega_set(tree8_view, cls(tree8, 2)[0])) == [1, 2, 5]


def test_worked_examples(tree8, tree8_view):
    omega = omega_set(tree8_view, cls(tree8, 2)[0])
    a1 = solve_ancestors(tree8, tree8_view, omega, 1)
    assert a1.classes == tuple(range(8)) and a1.cover == (0,)
    a2 = solve_ancestors(tree8, tree8_view, omega, 2)
    assert names(tree8, a2.classes) == [1, 2, 5]
    assert [tree8.names[v] for v in a2.cover] == ["v4", "5"]
    assert a2.cost == 3 - tree8_view.mass_of(a2.classes)
    assert bruteforce_ancestors(tree8, tree8_view, omega, 2).mask == a2.mask


def test_sequence_r2(tree8, tree8_view):
    seq = ancestor_sequence(tree8, tree8_view, 2)
    assert [s.mass for s in seq] == [0.15, 0.29000000000000004, 0.42000000000000004, 0.625, 0.75, 1.0]
    assert seq[-1].classes == tuple(range(8))
    assert all(s.complexity <= 2 for s in seq)


def test_compositions():
    assert list(positive_compositions(4, 2)) == [(1, 3), (2, 2), (3, 1)]
    assert list(positive_compositions(2, 3)) == []
    assert sum(1 for _ in positive_compositions(7, 3)) == 15  # C(6, 2)


def test_budget_guard(tree8, tree8_view):
    h = balanced_tree(32)
    p = ProbabilityView(h, np.full(32, 1 / 32))
    with pytest.raises(ValueError, match="budget"):
        solve_ancestors(h, p, [0], MAX_BUDGET + 1)
    # r >= K is the unrestricted case and stays allowed
    assert solve_ancestors(h, p, [0], 32).classes == (0,)
    with pytest.raises(ValueError):
        solve_ancestors(tree8, tree8_view, [0], 0)
    with pytest.raises(ValueError):
        solve_ancestors(tree8, tree8_view, [], 2)


def test_oracle_size_guard():
    h = balanced_tree(16)
    with pytest.raises(ValueError, match="brute force"):
        BruteForceAncestors(h, ProbabilityView(h, np.full(16, 1 / 16)), 2)


def test_literal_walk_is_not_nested():
    # frozen counterexample: following the ranks literally drops class 2
    h = balanced_tree(8, 2)
    p = ProbabilityView(h, [0.09, 0.2, 0.01, 0.37, 0.04, 0.22, 0.05, 0.02])
    literal = [s.classes for s in ancestor_sequence(h, p, 3, nested=False)]
    assert literal == [(3,), (3, 5), (1, 3, 5), (0, 1, 3, 5), (0, 1, 2, 3, 5, 6),
                       (0, 1, 3, 4, 5, 6, 7), tuple(range(8))]
    nested = [s.classes for s in ancestor_sequence(h, p, 3)]
    assert nested == literal[:5] + [(0, 1, 2, 3, 4, 5, 6), tuple(range(8))]


def test_single_class_tree():
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        h = balanced_tree(1)
    p = ProbabilityView(h, [1.0])
    assert [s.classes for s in ancestor_sequence(h, p, 1)] == [(0,)]


@st.composite
def instances(draw, max_k=10):
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    h = random_tree(draw(st.integers(2, max_k)), rng)
    conc = draw(st.sampled_from([0.1, 0.5, 1.0, 5.0]))
    return h, dirichlet_view(h, rng, conc)


@settings(max_examples=60, deadline=None)
@given(instances(), st.integers(1, 4), st.data())
def test_dp_matches_oracle(inst, r, data):
    h, p = inst
    omega = data.draw(st.sets(st.integers(0, h.K - 1), min_size=1))
    want = bruteforce_ancestors(h, p, omega, r)
    for prune in (True, False):
        got = solve_ancestors(h, p, omega, r, prune=prune)
        assert got.mask == want.mask
        assert abs(got.cost - want.cost) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(instances(), st.integers(1, 5), st.data())
def test_solution_feasible_and_budget_monotone(inst, r, data):
    h, p = inst
    omega = data.draw(st.sets(st.integers(0, h.K - 1), min_size=1))
    a = solve_ancestors(h, p, omega, r)
    assert set(omega) <= set(a.classes)
    assert a.complexity == representation_complexity(h, a.classes) <= r
    assert solve_ancestors(h, p, omega, r + 1).cost <= a.cost + 1e-12


@settings(max_examples=60, deadline=None)
@given(instances(max_k=14), st.integers(1, 5))
def test_sequence_nested_and_bounded(inst, r):
    h, p = inst
    seq = ancestor_sequence(h, p, r)
    assert seq[-1].mask == h.full_mask
    assert seq[0].classes[0] == p.order[0] or p.order[0] in seq[0].classes
    for a, b in zip(seq, seq[1:]):
        assert a.mask & ~b.mask == 0 and a.mask != b.mask
        assert a.mass <= b.mass
    assert all(s.complexity <= r for s in seq)


@settings(max_examples=40, deadline=None)
@given(instances())
def test_budget_one_is_lowest_common_ancestor(inst):
    h, p = inst
    for j in range(1, h.K + 1):
        omega = p.order[:j].tolist()
        paths = [set(path_to_root(h, h.leaf_of_class[c])) for c in omega]
        common = set.intersection(*paths)
        lca = max(common, key=lambda v: h.depth[v])
        assert solve_ancestors(h, p, omega, 1).mask == h.masks[lca]


def test_unrestricted_budget_returns_omega(tree8, tree8_view):
    omega = cls(tree8, 1, 3, 5, 7)
    assert bits(solve_ancestors(tree8, tree8_view, omega, 8).mask) == tuple(sorted(omega))

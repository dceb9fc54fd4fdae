import pytest
from hypothesis import given, settings, strategies as st

from artifact.symbolic import (
    OMEGA,
    BoundaryAddress,
    Exactness,
    Fin,
    LambdaAlpha,
    LambdaAlphaN,
    LambdaMax,
    LambdaR,
    LambdaS,
    NodeStatus,
    OrdinalIndex,
    address_from_json,
    address_to_json,
    boundary_status,
    cb_height_symbolic,
    cb_rank_bruteforce,
    check_proper,
    concat,
    enumerate_boundary,
    is_prefix,
    ladder,
    subtree_shift1,
    subtree_shift2,
    tree_contains,
    tree_from_json,
    tree_of_subset,
    weight,
)

OMEGA_ORD = OrdinalIndex(None)
E, T = Exactness.EXACT, Exactness.TRUNCATED


def prefixes(boundary):
    return [(b.prefix, b.exactness) for b in boundary]


def test_concat_cases():
    assert concat((2,), (3, OMEGA)) == (2, 3, OMEGA)
    assert concat((), (5,)) == (5,)
    assert concat((1, 4), ()) == (1, 4)


def test_weight_cases():
    assert weight((2, 3)) == 5
    assert weight(()) == 0
    assert weight((4, OMEGA)) is OMEGA


def test_prefix_relation():
    assert is_prefix((2,), (2, 3, OMEGA))
    assert is_prefix((), (7, 1))
    assert not is_prefix((3,), (2, 3))


def test_ladder_values():
    assert ladder(OMEGA_ORD, 3) == Fin(2)
    assert ladder(Fin(4), 2) == Fin(1)
    assert ladder(Fin(4), 10) == Fin(3)


@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 12))
def test_ladder_monotone_and_below(j, k, n):
    lo, hi = sorted((j, k))
    a, b = ladder(Fin(lo), n), ladder(Fin(hi), n)
    assert a.k <= b.k
    if hi > 0:
        assert b.k < hi


def test_membership_cases():
    assert tree_contains(LambdaS(), (2, 3))
    assert not tree_contains(LambdaS(), (2, 1))
    assert not tree_contains(LambdaR(), (1, 2, 1))
    assert tree_contains(LambdaAlpha(Fin(1)), (2,))
    assert not tree_contains(LambdaAlpha(Fin(1)), (2, 2))


def test_boundary_status_cases():
    assert boundary_status(LambdaMax(), (3, OMEGA)) is NodeStatus.LEAF
    assert boundary_status(LambdaMax(), (3,)) is NodeStatus.INTERIOR
    assert boundary_status(LambdaAlpha(Fin(1)), (2,)) is NodeStatus.LEAF


def test_enumerate_boundary_cases():
    got = prefixes(enumerate_boundary(LambdaAlpha(Fin(1)), 2, 3))
    assert got == [((OMEGA,), E), ((1,), E), ((2,), E), ((3,), E)]
    got = prefixes(enumerate_boundary(tree_of_subset({(), (OMEGA,), (2,)}), 5, 5))
    assert got == [((OMEGA,), E), ((2,), E)]
    got = prefixes(enumerate_boundary(LambdaMax(), 1, 2))
    assert got == [((OMEGA,), E), ((1,), T), ((2,), T)]


@pytest.mark.parametrize("tree", [LambdaMax(), LambdaS(), LambdaR(), LambdaAlpha(Fin(2)),
                                  LambdaAlpha(OMEGA_ORD), LambdaAlphaN(Fin(1), 3)])
def test_prefix_closure_of_enumeration(tree):
    for b in enumerate_boundary(tree, 3, 4):
        for k in range(len(b.prefix) + 1):
            assert tree_contains(tree, b.prefix[:k])


def test_alpha_boundary_identity():
    alpha, depth, width = OMEGA_ORD, 3, 4
    whole = {b.prefix for b in enumerate_boundary(LambdaAlpha(alpha), depth, width)}
    parts = {(OMEGA,)}
    for k in range(1, width + 1):
        sub = enumerate_boundary(LambdaAlpha(ladder(alpha, k)), depth - 1, width)
        parts |= {(k,) + b.prefix for b in sub}
    assert whole == parts


def test_inclusion_of_smaller_alpha():
    small = enumerate_boundary(LambdaAlpha(Fin(1)), 3, 4)
    big = LambdaAlpha(Fin(3))
    for b in small:
        assert tree_contains(big, b.prefix)


def test_subtree_shifts():
    sh = subtree_shift1(LambdaAlpha(Fin(2)), (2,))
    want = {b.prefix for b in enumerate_boundary(LambdaAlpha(Fin(1)), 3, 4)}
    assert {b.prefix for b in enumerate_boundary(sh, 3, 4)} == want
    full = {b.prefix for b in enumerate_boundary(LambdaMax(), 3, 3)}
    assert {b.prefix for b in enumerate_boundary(subtree_shift1(LambdaMax(), (5,)), 3, 3)} == full
    assert {b.prefix for b in enumerate_boundary(subtree_shift2(LambdaMax(), (), 3), 3, 3)} == full


def test_tree_of_subset():
    t = tree_of_subset({(2, OMEGA), (3,)})
    for node in [(), (2,), (2, OMEGA), (3,)]:
        assert tree_contains(t, node)
    assert not tree_contains(t, (1,))
    assert tree_contains(tree_of_subset({(OMEGA,)}), (OMEGA,))
    with pytest.raises(ValueError):
        tree_of_subset(set())


def test_check_proper():
    assert check_proper(LambdaAlpha(Fin(2)), 3, 4).ok
    assert check_proper(LambdaMax()).ok
    rep = check_proper(tree_of_subset({(), (OMEGA,), (2,)}))
    assert not rep.ok
    assert any(node == () and tag == "pii" and "1" in msg for node, tag, msg in rep.violations)


def test_cb_height_symbolic():
    assert cb_height_symbolic(LambdaAlphaN(Fin(2), 3)) == (Fin(2), 3)
    assert cb_height_symbolic(LambdaAlpha(OMEGA_ORD)) == (OMEGA_ORD, 1)
    assert cb_height_symbolic(LambdaAlpha(Fin(0))) == (Fin(0), 1)


def test_cb_rank_small_cases():
    tree = LambdaAlpha(Fin(1))
    ranks = cb_rank_bruteforce(enumerate_boundary(tree, 3, 5), tree)
    for b, r in ranks.items():
        assert r == (1 if b.prefix == (OMEGA,) else 0)
    tree = LambdaAlpha(Fin(2))
    ranks = cb_rank_bruteforce(enumerate_boundary(tree, 4, 4), tree)
    assert ranks[BoundaryAddress((OMEGA,), E)] == 2
    single = [BoundaryAddress((OMEGA,), E)]
    assert cb_rank_bruteforce(single) == {single[0]: 0}


def test_cb_rank_refuses_truncated_points():
    with pytest.raises(ValueError):
        cb_rank_bruteforce(enumerate_boundary(LambdaMax(), 1, 2))


def test_json_round_trip():
    eta = (3, OMEGA)
    assert address_to_json(eta) == [3, "w"]
    assert address_from_json([3, "w"]) == eta
    for tree in [LambdaMax(), LambdaR(), LambdaAlphaN(Fin(2), 3), LambdaAlpha(OMEGA_ORD)]:
        again = tree_from_json(tree.to_json())
        assert again.to_json() == tree.to_json()


@settings(max_examples=50)
@given(st.lists(st.integers(1, 5), max_size=4))
def test_lambda_r_rule(entries):
    assert tree_contains(LambdaR(), tuple(entries)) == (entries.count(1) <= 1)

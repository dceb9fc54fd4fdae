from fractions import Fraction

import numpy as np
import pytest

from artifact.realization import (
    ClusterPoint,
    TemplateCloud,
    b_interval,
    copy_span,
    realize_bp_space,
    realize_s_space,
    realize_z_space,
    segment_grid,
    truncation_error_bound,
    verify_space_conditions,
)
from artifact.scales import PMode, PSequence, geometric_good, pair_b_for_p
from artifact.symbolic import (
    OMEGA,
    BoundaryAddress,
    Exactness,
    Fin,
    LambdaAlpha,
    LambdaMax,
    OrdinalIndex,
    tree_of_subset,
)

B = geometric_good(Fraction(1, 30), Fraction(1, 30))


def leaf(*eta):
    return BoundaryAddress(tuple(eta), Exactness.EXACT)


def test_interval_cases():
    root = b_interval(B, ())
    assert (root.lo, root.hi) == pytest.approx((0.0, 31 / 900), rel=1e-15)
    w = b_interval(B, (OMEGA,))
    assert (w.lo, w.hi) == pytest.approx((0.0, 1 / 900), rel=1e-15)
    two = b_interval(B, (2,))
    assert two.hi == pytest.approx(2 / 900, rel=1e-15)
    assert two.lo == pytest.approx(2 / 900 - (B(2) + B(3)), rel=1e-15)


def test_copy_span_matches_interval_diameter():
    for eta in [(), (1,), (2, 3), (OMEGA,), (1, OMEGA)]:
        assert copy_span(B, eta) == pytest.approx(b_interval(B, eta).diam, rel=1e-9)


def test_s_space_points():
    sp = realize_s_space(LambdaAlpha(Fin(1)), B, 2, 3)
    x = {lab.prefix: sp.coords[i, 0] for i, lab in enumerate(sp.labels)}
    assert x[(OMEGA,)] == pytest.approx(1 / 900, rel=1e-14)
    assert x[(2,)] == pytest.approx(2 / 900, rel=1e-14)
    assert x[(3,)] == pytest.approx(B(1) + B(2), rel=1e-14)
    single = realize_s_space(tree_of_subset({(OMEGA,)}), B, 3, 3)
    assert len(single) == 1 and single.coords[0, 0] == pytest.approx(B(1))


def test_realizer_gate():
    rep = verify_space_conditions(realize_s_space(LambdaMax(), B, 3, 5))
    assert rep.ok, rep.failures[:3]


def test_perturbation_breaks_separation():
    sp = realize_s_space(LambdaMax(), B, 3, 5)
    idx = next(i for i, lab in enumerate(sp.labels) if lab.prefix[:1] == (2,))
    coords = sp.coords.copy()
    coords[idx, 0] += B(0) / 2
    rep = verify_space_conditions(sp.with_coords(coords))
    bad = [c for c in rep.failures if c.name == "separation"]
    assert bad and bad[0].node == (1,)


def test_error_bound_behaviour():
    prev = truncation_error_bound(LambdaMax(), B, 2, 4)
    for depth in (3, 4):
        cur = truncation_error_bound(LambdaMax(), B, depth, 4)
        assert cur <= prev
        prev = cur
    assert truncation_error_bound(tree_of_subset({(OMEGA,), (2,)}), B, 4, 4) == 0.0


def test_bp_space_cluster_conditions():
    pair = pair_b_for_p(PSequence(2, PMode.POWER_M, 2), 3)
    sp = realize_bp_space(LambdaAlpha(Fin(1)), pair, 3, 3)
    rep = verify_space_conditions(sp)
    assert rep.ok, rep.failures[:3]
    names = {c.name for c in rep.checks}
    assert {"cluster_i", "cluster_ii", "cluster_iii", "cluster_iv_a", "cluster_iv_b"} <= names
    sizes = [sum(isinstance(l, ClusterPoint) and l.k == k for l in sp.labels) for k in (1, 2, 3)]
    assert sizes == [2, 4, 16]


def test_two_point_template_sits_on_endpoints():
    sp = realize_z_space(LambdaAlpha(Fin(1)), B, TemplateCloud(np.array([0.0, 1.0])), 2, 3)
    by_leaf = {}
    for i, lab in enumerate(sp.labels):
        by_leaf.setdefault(lab.leaf.prefix, []).append(sp.coords[i, 0])
    for eta, xs in by_leaf.items():
        iv = b_interval(B, eta)
        assert sorted(xs) == pytest.approx([iv.lo, iv.hi], rel=1e-12, abs=1e-18)


def test_z_space_conditions():
    sp = realize_z_space(LambdaAlpha(OrdinalIndex(None)), B, segment_grid(5), 3, 4)
    rep = verify_space_conditions(sp)
    assert rep.ok, rep.failures[:3]


def test_save_load_round_trip(tmp_path):
    sp = realize_s_space(LambdaMax(), B, 2, 3)
    path = tmp_path / "s.json"
    sp.save(path)
    again = type(sp).load(path)
    assert again.labels == sp.labels
    assert np.array_equal(again.coords, sp.coords)

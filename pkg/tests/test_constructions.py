import json
from fractions import Fraction

import numpy as np
import pytest

from artifact.constructions import (
    component_R,
    component_quotient_check,
    densify,
    gifs_component_space,
    gifs_mixed,
    gifs_sandwiched,
    gifs_scattered,
    lexicographic_surjection,
    nonattractor_bound,
    project_address,
    surgery,
    surgery_prefixed,
)
from artifact.gifs_engine import PointSet, hausdorff, hutchinson_step
from artifact.realization import ClusterPoint
from artifact.scales import PMode, PSequence, geometric_good, pair_b_for_p
from artifact.symbolic import (
    OMEGA,
    BoundaryAddress,
    Exactness,
    Fin,
    LambdaMax,
    LambdaR,
    LambdaS,
    OrdinalIndex,
)

B = geometric_good(Fraction(1, 30), Fraction(1, 30))
OMEGA_ORD = OrdinalIndex(None)


def leaf(*eta):
    return BoundaryAddress(tuple(eta), Exactness.EXACT)


def test_projection_onto_subtree():
    assert project_address(LambdaS(), (2, OMEGA)) == ((2, OMEGA), False)
    assert project_address(LambdaS(), (1, 3)) == ((OMEGA,), False)
    # idempotent on the target's own addresses
    for eta in [(2, OMEGA), (3, 2, OMEGA), (OMEGA,)]:
        once, _ = project_address(LambdaS(), eta)
        assert project_address(LambdaS(), once) == (once, False)


def test_surgery_rules():
    assert surgery((2, 3, OMEGA), 2)[0] == (4, 2, OMEGA)
    assert surgery_prefixed((2, 2, OMEGA), 2, 3)[0] == (2, 2, 1, OMEGA)


def test_component_R_cases():
    assert component_R(2, (OMEGA,)) == (2, OMEGA)
    assert component_R(3, (1, 5)) == (3, 1, 5)
    # the second case drops the entry k-1
    assert component_R(2, (5, 1, 2)) == (2, 5, 2)
    assert component_R(2, (5, 3)) == (2, 5, OMEGA)


def test_lexicographic_surjection():
    table = lexicographic_surjection(["a", "b", "c"], [1, 2])
    assert table == {"a": 1, "b": 2, "c": 1}
    with pytest.raises(ValueError):
        lexicographic_surjection(["a"], [1, 2])


def test_nonattractor_bound_values():
    c = nonattractor_bound(PSequence(2, PMode.POWER_M, 2), 1, 6)
    assert c[2:5] == [Fraction(31, 16), Fraction(87, 256), Fraction(439, 65536)]
    assert all(c[i + 1] < c[i] for i in range(3, 5))
    assert c[5] < Fraction(1, 100)
    with pytest.raises(ValueError):
        nonattractor_bound(PSequence(2, PMode.POWER_M, 2), 1, 1)


def test_scattered_examples():
    bundle = gifs_scattered(Fin(1), 1, B, 3, 6)
    G, F = bundle.witnesses["G"], bundle.witnesses["F"]
    for lab in bundle.space.labels:
        assert G(lab, lab) == leaf(1)
    assert F(leaf(OMEGA), leaf(3)) == leaf(4)
    assert bundle.attractor_check()["exact"]


@pytest.mark.parametrize("alpha,n", [(Fin(0), 1), (Fin(1), 3), (Fin(2), 2), (OMEGA_ORD, 2)])
def test_scattered_small_instances(alpha, n):
    bundle = gifs_scattered(alpha, n, B, 3, 4)
    assert bundle.attractor_check()["exact"]
    for name, rec in bundle.lipschitz().items():
        assert rec["measured"] <= rec["claimed"], name


def test_scattered_rejects_finite_space_with_several_points():
    with pytest.raises(ValueError):
        gifs_scattered(Fin(0), 2, B, 3, 4)


def test_sandwiched_small():
    for tree in (LambdaR(), LambdaS()):
        bundle = gifs_sandwiched(tree, B, 3, 4)
        assert bundle.attractor_check()["exact"]
        for name, rec in bundle.lipschitz().items():
            assert rec["measured"] <= rec["claimed"], name


def test_sandwich_violation_is_rejected():
    with pytest.raises(ValueError):
        gifs_sandwiched(LambdaMax(), B, 3, 3)


def test_mixed_examples():
    pair = pair_b_for_p(PSequence(2, PMode.POWER_M, 2), 3)
    base = gifs_scattered(Fin(1), 1, pair.b, 3, 3)
    bundle = gifs_mixed(base, pair, 2, 3, 3)
    assert bundle.attractor_check()["exact"]
    F = bundle.witnesses["F"]
    assert F(ClusterPoint(1, 1), ClusterPoint(1, 2)) == ClusterPoint(2, 2)
    images = {F(ClusterPoint(1, i), ClusterPoint(1, j)) for i in (1, 2) for j in (1, 2)}
    assert images == {ClusterPoint(2, i) for i in range(1, 5)}
    rec = bundle.lipschitz(names=["F"])["F"]
    assert rec["measured"] <= float(pair.lam)


def test_component_space_small():
    bundle = gifs_component_space(depth=2, width=3)
    check = bundle.attractor_check()
    assert check["exact"], check
    q = component_quotient_check(bundle)
    assert q["quotient_attractor_exact"] and q["matches_s_space"]


def test_densify_two_points():
    template = gifs_scattered(Fin(1), 1, B, 3, 4)
    K = np.array([[0.0], [10.0]])
    cloud, G = densify(K, 1.0, template)
    assert hausdorff(PointSet(K), cloud) <= 0.5
    img = hutchinson_step(G, cloud)
    assert set(img.labels) == set(cloud.labels)


def test_densify_singleton():
    template = gifs_scattered(Fin(1), 1, B, 3, 4)
    cloud, _ = densify(np.array([[3.0]]), 0.2, template)
    assert hausdorff(PointSet([[3.0]]), cloud) < 0.2


def test_bundle_directory(tmp_path):
    bundle = gifs_scattered(Fin(1), 1, B, 3, 4)
    rep = bundle.save(tmp_path)
    for name in ("space.json", "gifs.json", "witnesses.json", "report.json"):
        assert (tmp_path / name).exists()
    desc = json.loads((tmp_path / "gifs.json").read_text())
    assert desc["order"] == 2 and len(desc["maps"]) == 2
    assert rep["attractor"]["exact"]

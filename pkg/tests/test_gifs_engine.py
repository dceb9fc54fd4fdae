import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from artifact.gifs_engine import (
    ConstantMap,
    Gifs,
    NumericMap,
    PointSet,
    Resolver,
    UnaryMap,
    combine_separated,
    component_quotient,
    delta_net,
    hausdorff,
    hutchinson_step,
    iterate_to_attractor,
    lift_order,
    lipschitz_estimate,
    quotient_gifs,
    separation_ratio,
)

HALF = NumericMap(lambda x: x / 2, claimed_lip=0.5, name="left")
HALF_UP = NumericMap(lambda x: x / 2 + 0.5, claimed_lip=0.5, name="right")


def values(ps):
    return sorted(np.round(ps.coords[:, 0], 12).tolist())


def test_hausdorff_cases():
    assert hausdorff([[0.0]], [[0.0]]) == 0.0
    assert hausdorff([[0.0]], [[3.0]]) == 3.0
    assert hausdorff([[0.0], [1.0]], [[0.5]]) == 0.5


@settings(max_examples=40)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=8),
       st.lists(st.floats(-5, 5), min_size=1, max_size=8))
def test_hausdorff_symmetric_and_brute_force(a, b):
    A, B = np.array(a)[:, None], np.array(b)[:, None]
    d = np.abs(A - B.T)
    want = max(d.min(axis=1).max(), d.min(axis=0).max())
    assert hausdorff(A, B) == pytest.approx(want, abs=1e-12)
    assert hausdorff(B, A) == pytest.approx(want, abs=1e-12)


def test_lipschitz_cases():
    pts = np.array([[0.0], [1.0], [2.0]])
    assert float(lipschitz_estimate(HALF, pts)) == pytest.approx(0.5)
    const = NumericMap(lambda x: np.ones_like(x))
    assert float(lipschitz_estimate(const, pts)) == 0.0


def test_lipschitz_uses_max_metric_on_tuples():
    pts = np.array([[0.0], [1.0], [3.0]])
    add = NumericMap(lambda x, y: x + y, order=2)
    # (x,y) -> x+y has Lip 2 for the maximum metric
    assert float(lipschitz_estimate(add, pts)) == pytest.approx(2.0)


def test_hutchinson_cases():
    host = PointSet([[4.0]], labels=["c"])
    res = Resolver(host)
    img = hutchinson_step(Gifs([ConstantMap(res, "c")]), PointSet([[0.0], [9.0]], ["c", "c"]))
    assert img.labels == ("c",)
    img = hutchinson_step(Gifs([HALF, HALF_UP]), [[0.0]])
    assert values(img) == [0.0, 0.5]
    low = NumericMap(lambda x, y: np.minimum(x, y), order=2)
    assert values(hutchinson_step(Gifs([low]), [[0.0], [1.0]])) == [0.0, 1.0]


def test_dyadic_iteration():
    res = iterate_to_attractor(Gifs([HALF, HALF_UP]), [[0.0]], tol=1e-3, max_iter=40)
    for n, h in enumerate(res.history):
        assert h == pytest.approx(2.0 ** -(n + 1))
    for n, size in enumerate(res.sizes[:6], start=1):
        assert size == 2 ** n
    assert res.converged


def test_constant_iteration_stops_after_one_step():
    const = NumericMap(lambda x: np.full_like(x, 2.0), claimed_lip=0.0)
    res = iterate_to_attractor(Gifs([const]), [[5.0]], tol=1e-9)
    assert res.history == [3.0, 0.0]
    assert values(res.points) == [2.0]


def test_non_contractive_warns():
    ident = NumericMap(lambda x: x, claimed_lip=1.0)
    with pytest.warns(UserWarning):
        iterate_to_attractor(Gifs([ident]), [[0.0]], max_iter=2)


def test_delta_net_covers_and_separates():
    pts = PointSet(np.linspace(0, 1, 101)[:, None])
    net = delta_net(pts, 0.1)
    d = np.abs(net.coords - net.coords.T) + np.eye(len(net)) * 9
    assert d.min() > 0.1
    assert hausdorff(net, pts) <= 0.1


def test_lift_order():
    host = PointSet([[1.0], [2.0]], labels=["a", "b"])
    const = ConstantMap(Resolver(host), "a")
    lifted = lift_order(const, 3)
    ids, out = lifted.table(host)
    assert ids.shape == (2, 2, 2)
    assert set(out.labels[i] for i in np.unique(ids)) == {"a"}
    lifted_sys = Gifs([lift_order(HALF, 2), lift_order(HALF_UP, 2)])
    a = b = PointSet([[0.0]])
    for _ in range(5):
        a = hutchinson_step(Gifs([HALF, HALF_UP]), a)
        b = hutchinson_step(lifted_sys, b)
        assert values(a) == values(b)


def test_separation_ratio_example():
    parts = [PointSet([[0.0], [1.0]]), PointSet([[11.0], [12.0]])]
    lam = separation_ratio(parts)
    assert lam == pytest.approx(0.1)
    assert lam < 1 / 0.5


def test_combine_two_singletons():
    parts = []
    for x, name in [(0.0, "p"), (10.0, "q")]:
        host = PointSet([[x]], labels=[name])
        parts.append((host, Gifs([ConstantMap(Resolver(host), name)])))
    G, union = combine_separated(parts)
    assert len(G) == 2
    img = hutchinson_step(G, union)
    assert set(img.labels) == set(union.labels) == {(0, "p"), (1, "q")}


def test_combine_rejects_overlap():
    parts = []
    for x in (0.0, 0.5):
        host = PointSet([[x], [x + 1]], labels=["a", "b"])
        res = Resolver(host)
        swap = UnaryMap(res, lambda l: "b" if l == "a" else "a", claimed_lip=1.0)
        parts.append((host, Gifs([swap])))
    with pytest.raises(ValueError):
        combine_separated(parts)


def test_component_quotient_cases():
    cloud = PointSet([[0.0], [0.1], [0.2], [5.0], [5.1]])
    reps, assign = component_quotient(cloud, 1.0)
    assert assign.count == 2
    assert values(reps) == [0.0, 5.0]
    assert assign.labels.tolist() == [0, 0, 0, 1, 1]
    _, whole = component_quotient(cloud, 10.0)
    assert whole.count == 1


def test_quotient_of_simple_maps():
    cloud = PointSet([[0.0], [0.1], [5.0], [5.1]])
    _, assign = component_quotient(cloud, 1.0)
    const = NumericMap(lambda x: np.full_like(x, 5.05))
    ident = NumericMap(lambda x: x)
    rep = quotient_gifs(Gifs([const, ident]), assign, cloud)
    assert rep.ok
    assert rep.tables[0].tolist() == [1, 1]
    assert rep.tables[1].tolist() == [0, 1]
    assert rep.attractor_ok


def test_quotient_flags_split_images():
    cloud = PointSet([[0.0], [0.1], [5.0], [5.1]])
    _, assign = component_quotient(cloud, 1.0)
    tear = NumericMap(lambda x: np.where(x < 0.05, 0.0, 5.0))
    rep = quotient_gifs(Gifs([tear]), assign, cloud)
    assert not rep.ok and rep.violations


def test_infinite_separation_ratio_on_touching_parts():
    assert math.isinf(separation_ratio([PointSet([[0.0]]), PointSet([[0.0]])]))

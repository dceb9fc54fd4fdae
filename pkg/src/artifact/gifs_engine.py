"""Order-m maps, the Hausdorff metric, Lipschitz measurement and set iteration.

Maps come in two flavours. Label maps send labels of a host space to labels
(host points or ideal points the host knows how to place) and can be
checked exactly. Numeric maps act on coordinate arrays.
"""

from __future__ import annotations

import itertools
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .realization import HierPoints, PointFactory, SpaceApprox

TUPLE_BUDGET = 10 ** 7
EXACT_PAIR_BUDGET = 6 * 10 ** 8
SAMPLE_PAIRS = 10 ** 6


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("GIFS_LAB_THREADS", "1")))
    except ValueError:
        return 1


class BudgetExceeded(RuntimeError):
    pass


# --------------------------------------------------------------- point sets

class PointSet:
    """Finite point cloud with optional labels and hierarchical coordinates."""

    def __init__(self, coords, labels=None, hier: HierPoints | None = None):
        coords = np.asarray(coords, dtype=float)
        if coords.ndim == 1:
            coords = coords[:, None]
        self.coords = coords
        self.labels = None if labels is None else tuple(labels)
        self.hier = hier
        if self.labels is not None and len(self.labels) != len(coords):
            raise ValueError("labels and coordinates differ in length")

    def __len__(self):
        return len(self.coords)

    @property
    def dim(self) -> int:
        return self.coords.shape[1]

    def take(self, idx) -> "PointSet":
        idx = np.asarray(idx, dtype=np.int64)
        labels = None if self.labels is None else [self.labels[i] for i in idx]
        hier = None if self.hier is None else self.hier.take(idx)
        return PointSet(self.coords[idx], labels, hier)

    def distance_matrix(self, other: "PointSet | None" = None) -> np.ndarray:
        other = self if other is None else other
        if self.hier is not None and other.hier is not None:
            return self.hier.cross(other.hier)
        diff = self.coords[:, None, :] - other.coords[None, :, :]
        return np.sqrt((diff * diff).sum(axis=-1))

    def paired(self, ia, other: "PointSet", ib) -> np.ndarray:
        if self.hier is not None and other.hier is not None:
            return self.hier.paired(ia, other.hier, ib)
        diff = self.coords[np.asarray(ia)] - other.coords[np.asarray(ib)]
        return np.sqrt((diff * diff).sum(axis=-1))


def as_pointset(obj) -> PointSet:
    if isinstance(obj, PointSet):
        return obj
    if isinstance(obj, SpaceApprox):
        return PointSet(obj.coords, obj.labels, obj.hier)
    return PointSet(np.asarray(obj, dtype=float))


class Resolver:
    """Assigns integer ids to output labels of label maps over one host.

    Host labels keep their host index; any other label (an ideal point the
    factory can place) is appended after them.
    """

    def __init__(self, host, factory: PointFactory | None = None):
        self.host = as_pointset(host)
        if self.host.labels is None:
            raise ValueError("label maps need a labelled host")
        self.factory = factory if factory is not None else getattr(host, "factory", None)
        self.index = {lab: i for i, lab in enumerate(self.host.labels)}
        self.extra: list = []
        self._pool = None

    def id_of(self, label) -> int:
        i = self.index.get(label)
        if i is None:
            if self.factory is None:
                raise KeyError(f"{label!r} is not a host point")
            i = len(self.host) + len(self.extra)
            self.index[label] = i
            self.extra.append(label)
            self._pool = None
        return i

    def ids(self, labels) -> np.ndarray:
        return np.fromiter((self.id_of(l) for l in labels), dtype=np.int64, count=len(labels))

    def ids_of_sample(self, sample: PointSet) -> np.ndarray:
        return self.ids(sample.labels)

    def label(self, i: int):
        n = len(self.host)
        return self.host.labels[i] if i < n else self.extra[i - n]

    @property
    def pool(self) -> PointSet:
        if self._pool is None:
            if not self.extra:
                self._pool = self.host
            else:
                hier_x = self.factory.build(self.extra)
                origin = getattr(self.factory, "origin", 0.0)
                coords_x = np.column_stack([origin + self.factory.b(1) + hier_x.suffix[:, 0],
                                            hier_x.extra])
                hier = None if self.host.hier is None else HierPoints.concat(
                    [self.host.hier, hier_x])
                self._pool = PointSet(np.vstack([self.host.coords, coords_x]),
                                      list(self.host.labels) + self.extra, hier)
        return self._pool


# --------------------------------------------------------------------- maps

class GifsMap:
    """A map X^m -> X with an optional claimed Lipschitz constant."""

    order = 1
    claimed_lip: float | None = None
    name = "map"
    backend = "numeric"

    def table(self, sample) -> tuple:
        """(ids of shape (n,)*m, output point set indexed by ids)."""
        raise NotImplementedError

    def evaluate(self, sample) -> tuple:
        """Images of all m-tuples in C order: (coords (n^m, d), labels or None)."""
        sample = as_pointset(sample)
        ids, out = self.table(sample)
        flat = np.asarray(ids).reshape(-1)
        labels = None if out.labels is None else [out.labels[i] for i in flat]
        return out.coords[flat], labels

    def describe(self) -> dict:
        return {"backend": self.backend, "name": self.name, "order": self.order,
                "claimed_lip": self.claimed_lip}


class NumericMap(GifsMap):
    """f(x_1, ..., x_m) given as a vectorised function of coordinate arrays."""

    def __init__(self, fn: Callable, order: int = 1, claimed_lip=None, name="numeric"):
        self.fn = fn
        self.order = order
        self.claimed_lip = claimed_lip
        self.name = name

    def table(self, sample):
        sample = as_pointset(sample)
        n, m = len(sample), self.order
        if n ** m > TUPLE_BUDGET:
            raise BudgetExceeded(f"{n}^{m} tuples exceed the budget")
        grids = np.indices((n,) * m).reshape(m, -1)
        args = [sample.coords[g] for g in grids]
        out = np.asarray(self.fn(*args), dtype=float).reshape(len(grids[0]), -1)
        ids = np.arange(len(out)).reshape((n,) * m)
        return ids, PointSet(out)


class LabelMap(GifsMap):
    """Base for maps computed on labels and resolved through a host."""

    backend = "symbolic"

    def __init__(self, resolver: Resolver, order: int, claimed_lip=None, name="symbolic"):
        self.resolver = resolver
        self.order = order
        self.claimed_lip = claimed_lip
        self.name = name

    def label_ids(self, labels: Sequence) -> np.ndarray:
        raise NotImplementedError

    def table(self, sample):
        sample = as_pointset(sample)
        if sample.labels is None:
            raise ValueError("label maps need a labelled sample")
        ids = self.label_ids(list(sample.labels))
        return ids, self.resolver.pool

    def __call__(self, *labels):
        """Image label of a single tuple."""
        ids = self.label_ids_tuple(labels)
        return self.resolver.label(ids)

    def label_ids_tuple(self, labels):
        arr = self.label_ids(list(labels)) if self.order == 1 else None
        if self.order == 1:
            return int(arr[0])
        uniq = list(dict.fromkeys(labels))
        table = self.label_ids(uniq)
        pos = tuple(uniq.index(l) for l in labels)
        return int(table[pos])


class ConstantMap(LabelMap):
    def __init__(self, resolver, label, order=1, name="constant"):
        super().__init__(resolver, order, 0.0, name)
        self.value = label

    def label_ids(self, labels):
        n = len(labels)
        return np.full((n,) * self.order, self.resolver.id_of(self.value), dtype=np.int64)


class UnaryMap(LabelMap):
    """Order-1 rule on labels, memoised."""

    def __init__(self, resolver, fn, claimed_lip=None, name="unary"):
        super().__init__(resolver, 1, claimed_lip, name)
        self.fn = fn
        self._memo: dict = {}

    def image(self, label):
        out = self._memo.get(label)
        if out is None:
            out = self._memo[label] = self.fn(label)
        return out

    def label_ids(self, labels):
        return self.resolver.ids([self.image(l) for l in labels])


class DispatchMap(LabelMap):
    """Order-2 map F(x, y) = branch(key(y), x)."""

    def __init__(self, resolver, key_fn, branch_fn, claimed_lip=None, name="dispatch"):
        super().__init__(resolver, 2, claimed_lip, name)
        self.key_fn = key_fn
        self.branch_fn = branch_fn
        self._memo: dict = {}

    def branch(self, key, label):
        k = (key, label)
        out = self._memo.get(k)
        if out is None:
            out = self._memo[k] = self.branch_fn(key, label)
        return out

    def label_ids(self, labels):
        keys = [self.key_fn(l) for l in labels]
        distinct = list(dict.fromkeys(keys))
        key_pos = {k: i for i, k in enumerate(distinct)}
        cols = np.empty((len(distinct), len(labels)), dtype=np.int64)
        for r, k in enumerate(distinct):
            cols[r] = self.resolver.ids([self.branch(k, l) for l in labels])
        which = np.array([key_pos[k] for k in keys], dtype=np.int64)
        return cols[which].T.copy()


class TupleMap(LabelMap):
    """Arbitrary order-m rule on label tuples; for small samples only."""

    def __init__(self, resolver, fn, order, claimed_lip=None, name="tuple"):
        super().__init__(resolver, order, claimed_lip, name)
        self.fn = fn
        self._memo: dict = {}

    def label_ids(self, labels):
        n = len(labels)
        if n ** self.order > TUPLE_BUDGET:
            raise BudgetExceeded(f"{n}^{self.order} tuples exceed the budget")
        out = np.empty((n,) * self.order, dtype=np.int64)
        for pos in itertools.product(range(n), repeat=self.order):
            key = tuple(labels[p] for p in pos)
            v = self._memo.get(key)
            if v is None:
                v = self._memo[key] = self.resolver.id_of(self.fn(*key))
            out[pos] = v
        return out


class PrecomposedMap(LabelMap):
    """inner(proj(x_1), ..., proj(x_m)) with a label projection."""

    def __init__(self, inner: LabelMap, proj, claimed_lip=None, name=None, resolver=None,
                 translate=None):
        super().__init__(resolver or inner.resolver, inner.order, claimed_lip,
                         name or f"{inner.name}∘proj")
        self.inner = inner
        self.proj = proj
        self.translate = translate
        self._memo: dict = {}

    def label_ids(self, labels):
        projected = []
        for l in labels:
            p = self._memo.get(l)
            if p is None:
                p = self._memo[l] = self.proj(l)
            projected.append(p)
        uniq = list(dict.fromkeys(projected))
        pos = {p: i for i, p in enumerate(uniq)}
        inv = np.array([pos[p] for p in projected], dtype=np.int64)
        inner = self.inner.label_ids(uniq)
        ids = inner[np.ix_(*([inv] * self.order))]
        if self.translate is not None:
            ids = self.translate(ids)
        return ids


class LiftedMap(LabelMap):
    """Evaluate an order-k map on the first k of m coordinates."""

    def __init__(self, inner: LabelMap, m: int):
        if m < inner.order:
            raise ValueError("cannot lower the order of a map")
        super().__init__(inner.resolver, m, inner.claimed_lip, f"{inner.name}^{m}")
        self.inner = inner

    def label_ids(self, labels):
        base = self.inner.label_ids(labels)
        n = len(labels)
        shape = base.shape + (1,) * (self.order - self.inner.order)
        return np.broadcast_to(base.reshape(shape), (n,) * self.order)


class LiftedNumericMap(NumericMap):
    def __init__(self, inner: NumericMap, m: int):
        if m < inner.order:
            raise ValueError("cannot lower the order of a map")
        k = inner.order
        super().__init__(lambda *xs: inner.fn(*xs[:k]), m, inner.claimed_lip,
                         f"{inner.name}^{m}")


def lift_order(f: GifsMap, m: int) -> GifsMap:
    if m == f.order:
        return f
    if isinstance(f, LabelMap):
        return LiftedMap(f, m)
    if isinstance(f, NumericMap):
        return LiftedNumericMap(f, m)
    raise TypeError("cannot lift this map")


@dataclass
class Gifs:
    maps: list

    def __post_init__(self):
        if not self.maps:
            raise ValueError("a GIFS needs at least one map")
        orders = {f.order for f in self.maps}
        if len(orders) != 1:
            raise ValueError(f"maps of mixed order {orders}; lift them first")

    @property
    def order(self) -> int:
        return self.maps[0].order

    @property
    def symbolic(self) -> bool:
        return all(isinstance(f, LabelMap) for f in self.maps) and \
            len({id(f.resolver) for f in self.maps}) == 1

    @property
    def claimed_lip(self):
        vals = [f.claimed_lip for f in self.maps]
        return None if any(v is None for v in vals) else max(vals)

    def __iter__(self):
        return iter(self.maps)

    def __len__(self):
        return len(self.maps)


# ----------------------------------------------------------------- metrics

def hausdorff(A, B, exact: bool = False) -> float:
    """Hausdorff distance between two finite point sets.

    With ``exact`` and hierarchical coordinates on both sides the pairwise
    distances come from those; otherwise nearest neighbours on coordinates.
    """
    A, B = as_pointset(A), as_pointset(B)
    if len(A) == 0 or len(B) == 0:
        raise ValueError("Hausdorff distance of an empty set")
    if A.dim != B.dim:
        raise ValueError("dimension mismatch")
    if exact and A.hier is not None and B.hier is not None:
        D = A.distance_matrix(B)
        return float(max(D.min(axis=1).max(), D.min(axis=0).max()))
    da, _ = cKDTree(B.coords).query(A.coords)
    db, _ = cKDTree(A.coords).query(B.coords)
    return float(max(da.max(), db.max()))


@dataclass
class LipschitzEstimate:
    """Measured sup of d(f(x), f(x')) / d_max(x, x'); a lower bound for Lip(f)."""

    value: float
    regime: str
    pairs: int
    witness: tuple = ()

    def __float__(self):
        return self.value

    def __le__(self, other):
        return self.value <= float(other)

    def __lt__(self, other):
        return self.value < float(other)

    def __ge__(self, other):
        return self.value >= float(other)


def _classes(ids: np.ndarray, axis: int):
    """Partition of axis entries by identical output slices."""
    moved = np.moveaxis(ids, axis, 0)
    n = moved.shape[0]
    flat = np.ascontiguousarray(moved.reshape(n, -1))
    _, first, inverse = np.unique(flat, axis=0, return_index=True, return_inverse=True)
    return inverse.reshape(-1), first


def _class_min_distance(D: np.ndarray, cls: np.ndarray, count: int) -> np.ndarray:
    order = np.argsort(cls, kind="stable")
    sorted_cls = cls[order]
    starts = np.flatnonzero(np.r_[True, sorted_cls[1:] != sorted_cls[:-1]])
    Ds = D[np.ix_(order, order)]
    rows = np.minimum.reduceat(Ds, starts, axis=0)
    both = np.minimum.reduceat(rows, starts, axis=1)
    np.fill_diagonal(both, 0.0)
    return both


def lipschitz_estimate(f: GifsMap, sample, seed: int = 0,
                       budget: int = EXACT_PAIR_BUDGET) -> LipschitzEstimate:
    """Largest distance quotient over pairs of m-tuples from ``sample``.

    Inputs that the map cannot tell apart along one coordinate are merged
    into classes; the quotient for two class tuples is attained at their
    closest members, so the compressed search is exhaustive. If the
    compressed problem is still too large, random pairs are used instead.
    """
    sample = as_pointset(sample)
    ids, out = f.table(sample)
    ids = np.asarray(ids)
    m, n = f.order, len(sample)
    if n < 2:
        return LipschitzEstimate(0.0, "exhaustive", 0)
    classes = [_classes(ids, a) for a in range(m)]
    counts = [len(c[1]) for c in classes]
    total = math.prod(c * c for c in counts)
    if total > budget:
        return _lipschitz_sampled(ids, out, sample, seed)
    D = sample.distance_matrix()
    deltas = [_class_min_distance(D, cls, cnt) for (cls, _), cnt in zip(classes, counts)]
    reps = [first for _, first in classes]
    V = ids[np.ix_(*reps)]
    # axis 0 is vectorised; loop over class pairs of the remaining axes
    lead = counts[0]
    ia, ib = np.meshgrid(np.arange(lead), np.arange(lead), indexing="ij")
    ia, ib = ia.ravel(), ib.ravel()
    rest_pairs = list(itertools.product(*[itertools.product(range(c), range(c))
                                          for c in counts[1:]]))

    def work(pair):
        c1 = tuple(p[0] for p in pair)
        c2 = tuple(p[1] for p in pair)
        den_rest = max((deltas[a + 1][c1[a], c2[a]] for a in range(m - 1)), default=0.0)
        den = np.maximum(deltas[0][ia, ib], den_rest)
        va = V[(slice(None),) + c1][ia]
        vb = V[(slice(None),) + c2][ib]
        ok = (den > 0) & (va != vb)
        if not ok.any():
            return 0.0, None
        num = out.paired(va[ok], out, vb[ok])
        q = num / den[ok]
        j = int(np.argmax(q))
        return float(q[j]), (int(ia[ok][j]), int(ib[ok][j]), c1, c2)

    threads = thread_count()
    if threads > 1 and len(rest_pairs) > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(work, rest_pairs))
    else:
        results = [work(p) for p in rest_pairs]
    best, wit = 0.0, ()
    for val, w in results:
        if val > best:
            best, wit = val, w
    return LipschitzEstimate(best, "exhaustive", total, wit or ())


def _lipschitz_sampled(ids, out, sample, seed):
    rng = np.random.default_rng(seed)
    m, n = ids.ndim, ids.shape[0]
    a = rng.integers(0, n, size=(SAMPLE_PAIRS, m))
    b = rng.integers(0, n, size=(SAMPLE_PAIRS, m))
    den = np.zeros(SAMPLE_PAIRS)
    for k in range(m):
        den = np.maximum(den, sample.paired(a[:, k], sample, b[:, k]))
    va, vb = ids[tuple(a.T)], ids[tuple(b.T)]
    ok = den > 0
    num = out.paired(va[ok], out, vb[ok])
    q = num / den[ok]
    return LipschitzEstimate(float(q.max()) if len(q) else 0.0, "sampled", SAMPLE_PAIRS)


# --------------------------------------------------------------- iteration

def _dedupe(coords: np.ndarray) -> np.ndarray:
    c = np.ascontiguousarray(coords)
    view = c.view(np.dtype((np.void, c.dtype.itemsize * c.shape[1])))
    _, idx = np.unique(view, return_index=True)
    return c[np.sort(idx)]


def hutchinson_step(G: Gifs, A) -> PointSet:
    """Union of all map images of A^m; exact label sets for symbolic systems."""
    A = as_pointset(A)
    if len(A) == 0:
        raise ValueError("empty set")
    if len(A) ** G.order > TUPLE_BUDGET:
        raise BudgetExceeded(f"{len(A)}^{G.order} tuples exceed the budget")
    if G.symbolic and A.labels is not None:
        found = set()
        pool = None
        for f in G.maps:
            ids, pool = f.table(A)
            found.update(np.unique(np.asarray(ids)).tolist())
        ordered = np.array(sorted(found), dtype=np.int64)
        return pool.take(ordered)
    parts = [f.evaluate(A)[0] for f in G.maps]
    return PointSet(_dedupe(np.vstack(parts)))


def delta_net(A: PointSet, delta: float) -> PointSet:
    """Greedy decimation keeping points pairwise more than delta apart."""
    if delta <= 0 or len(A) < 2:
        return A
    tree = cKDTree(A.coords)
    alive = np.ones(len(A), dtype=bool)
    keep = []
    for i in range(len(A)):
        if not alive[i]:
            continue
        keep.append(i)
        alive[tree.query_ball_point(A.coords[i], delta)] = False
    return A.take(np.array(keep))


@dataclass
class IterationResult:
    points: PointSet
    history: list
    converged: bool
    certificate: float | None = None
    sizes: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.points, self.history))

    def history_csv(self) -> str:
        rows = ["iter,hausdorff_step,set_size"]
        for i, (h, s) in enumerate(zip(self.history, self.sizes)):
            rows.append(f"{i + 1},{h!r},{s}")
        return "\n".join(rows) + "\n"


def iterate_to_attractor(G: Gifs, seed, tol: float = 1e-6, max_iter: int = 100,
                         delta: float = 0.0) -> IterationResult:
    """Iterate the Hutchinson operator until consecutive steps are within tol.

    The certificate tol/(1-lam) + delta/(1-lam) bounds the distance to the
    attractor when every map has a claimed constant lam < 1.
    """
    lam = G.claimed_lip
    if lam is None or lam >= 1:
        warnings.warn("GIFS is not certified contractive; no convergence certificate")
    A = as_pointset(seed)
    history, sizes = [], []
    converged = False
    for _ in range(max_iter):
        B = delta_net(hutchinson_step(G, A), delta)
        h = hausdorff(A, B)
        history.append(h)
        sizes.append(len(B))
        A = B
        if h <= tol:
            converged = True
            break
    cert = None
    if lam is not None and lam < 1:
        cert = (tol + delta) / (1 - lam)
    return IterationResult(A, history, converged, cert, sizes)


# ------------------------------------------------------- combining systems

def _diameter(ps: PointSet) -> float:
    if len(ps) < 2:
        return 0.0
    return float(ps.distance_matrix().max())


def separation_ratio(parts) -> float:
    """max diameter over min pairwise distance between distinct parts."""
    sets = [as_pointset(p) for p in parts]
    if len(sets) < 2:
        return 0.0
    diam = max(_diameter(s) for s in sets)
    dist = min(float(cKDTree(a.coords).query(b.coords)[0].min())
               for a, b in itertools.combinations(sets, 2))
    if dist <= 0:
        return math.inf
    return diam / dist


def combine_separated(parts) -> tuple:
    """Glue per-part systems into one system on the disjoint union.

    Each map of part i is pre-composed with the projection fixing part i and
    sending every other point to part i's first point. Returns the combined
    system and the union point set (labels are (part, label) pairs).
    """
    if not parts:
        raise ValueError("nothing to combine")
    sets = [as_pointset(s) for s, _ in parts]
    systems = [g for _, g in parts]
    m = max(g.order for g in systems)
    lips = [f.claimed_lip for g in systems for f in g.maps]
    if any(v is None for v in lips):
        raise ValueError("every map needs a claimed Lipschitz constant")
    lam = separation_ratio(sets)
    max_lip = max(lips)
    if max_lip > 0 and not lam < 1.0 / max_lip:
        raise ValueError(f"separation violated: ratio {lam} vs 1/Lip {1.0 / max_lip}")
    labels, coords, hiers = [], [], []
    for i, s in enumerate(sets):
        labs = s.labels if s.labels is not None else list(range(len(s)))
        labels.extend((i, l) for l in labs)
        coords.append(s.coords)
    union = PointSet(np.vstack(coords), labels)
    resolver = Resolver(union)
    factor = max(1.0, lam)
    maps = []
    for i, (s, g) in enumerate(zip(sets, systems)):
        anchor = s.labels[0] if s.labels is not None else 0
        for f in g.maps:
            f = lift_order(f, m)
            if not isinstance(f, LabelMap):
                raise TypeError("combine_separated needs label maps")
            inner_res = f.resolver
            lookup = {}

            def translate(ids, i=i, inner_res=inner_res, lookup=lookup):
                flat = np.unique(ids)
                for v in flat.tolist():
                    if v not in lookup:
                        lookup[v] = resolver.id_of((i, inner_res.label(v)))
                table = np.array([lookup[v] for v in flat.tolist()], dtype=np.int64)
                return table[np.searchsorted(flat, ids)]

            def proj(label, i=i, anchor=anchor):
                part, inner = label
                return inner if part == i else anchor

            maps.append(PrecomposedMap(f, proj, f.claimed_lip * factor,
                                       f"{f.name}@part{i}", resolver, translate))
    return Gifs(maps), union


# ----------------------------------------------------------- components

@dataclass
class ComponentAssignment:
    labels: np.ndarray
    representatives: dict

    @property
    def count(self) -> int:
        return len(self.representatives)


def component_quotient(cloud, gap) -> tuple:
    """Single-linkage clusters: i and j are linked when d <= min(gap_i, gap_j).

    ``gap`` may be a scalar or one threshold per point. Returns the
    representatives as a point set and the assignment.
    """
    cloud = as_pointset(cloud)
    n = len(cloud)
    g = np.broadcast_to(np.asarray(gap, dtype=float), (n,)).copy()
    if np.any(g < 0):
        raise ValueError("gap must be non-negative")
    if cloud.hier is not None:
        D = cloud.distance_matrix()
        thr = np.minimum(g[:, None], g[None, :])
        ii, jj = np.nonzero(np.triu(D <= thr, 1))
    else:
        tree = cKDTree(cloud.coords)
        pairs = tree.query_pairs(float(g.max()), output_type="ndarray")
        if len(pairs):
            d = np.linalg.norm(cloud.coords[pairs[:, 0]] - cloud.coords[pairs[:, 1]], axis=1)
            keep = d <= np.minimum(g[pairs[:, 0]], g[pairs[:, 1]])
            pairs = pairs[keep]
        ii, jj = (pairs[:, 0], pairs[:, 1]) if len(pairs) else (np.array([], int),) * 2
    graph = coo_matrix((np.ones(len(ii)), (ii, jj)), shape=(n, n))
    count, comp = connected_components(graph, directed=False)
    # representative: lexicographically smallest coordinates, then index
    order = np.lexsort(tuple(cloud.coords[:, k] for k in reversed(range(cloud.dim))))
    reps = {}
    for i in order.tolist():
        reps.setdefault(int(comp[i]), i)
    # renumber components by representative order
    ranked = sorted(reps, key=lambda c: order.tolist().index(reps[c]))
    renum = {c: r for r, c in enumerate(ranked)}
    labels = np.array([renum[c] for c in comp], dtype=np.int64)
    representatives = {renum[c]: reps[c] for c in ranked}
    return cloud.take([representatives[c] for c in range(count)]), \
        ComponentAssignment(labels, representatives)


def nearest_component(out: PointSet, cloud: PointSet, assignment: ComponentAssignment,
                      chunk: int = 1 << 22) -> np.ndarray:
    """Component of the nearest cloud point for every point of ``out``."""
    n, m = len(out), len(cloud)
    if out.hier is None or cloud.hier is None:
        _, idx = cKDTree(cloud.coords).query(out.coords)
        return assignment.labels[idx]
    best = np.empty(n, dtype=np.int64)
    rows = max(1, chunk // m)
    jb = np.arange(m)
    for start in range(0, n, rows):
        stop = min(n, start + rows)
        ia = np.repeat(np.arange(start, stop), m)
        ib = np.tile(jb, stop - start)
        d = out.paired(ia, cloud, ib).reshape(stop - start, m)
        best[start:stop] = d.argmin(axis=1)
    return assignment.labels[best]


@dataclass
class QuotientReport:
    ok: bool
    tables: list
    violations: list
    covered: set
    components: int

    @property
    def attractor_ok(self) -> bool:
        return self.ok and self.covered == set(range(self.components))


def quotient_gifs(G: Gifs, assignment: ComponentAssignment, cloud) -> QuotientReport:
    """Induced maps on components, checking each cell lands in one component."""
    cloud = as_pointset(cloud)
    nc = assignment.count
    comp = assignment.labels
    tables, violations, covered = [], [], set()
    for f in G.maps:
        ids, out = f.table(cloud)
        ids = np.asarray(ids)
        used = np.unique(ids)
        out_comp = np.full(int(used.max()) + 1, -1, dtype=np.int64)
        out_comp[used] = nearest_component(out.take(used), cloud, assignment)
        image = out_comp[ids]
        cell = np.zeros(ids.shape, dtype=np.int64)
        for axis in range(f.order):
            shape = [1] * f.order
            shape[axis] = -1
            cell = cell * nc + comp.reshape(shape)
        cell = np.broadcast_to(cell, ids.shape).ravel()
        image = image.ravel()
        order = np.argsort(cell, kind="stable")
        cs, im = cell[order], image[order]
        starts = np.flatnonzero(np.r_[True, cs[1:] != cs[:-1]])
        lo = np.minimum.reduceat(im, starts)
        hi = np.maximum.reduceat(im, starts)
        bad = np.flatnonzero(lo != hi)
        for b in bad[:5].tolist():
            violations.append((f.name, int(cs[starts[b]]), int(lo[b]), int(hi[b])))
        table = np.full((nc,) * f.order, -1, dtype=np.int64)
        table.reshape(-1)[cs[starts]] = lo
        tables.append(table)
        covered.update(np.unique(lo).tolist())
    return QuotientReport(not violations, tables, violations, covered, nc)

"""Interval families on the line and finite point-cloud realizations.

A realized space is a list of labelled points plus a certified bound on the
Hausdorff distance to the ideal (infinite) space. Labels are
``BoundaryAddress`` for scattered spaces, ``ClusterPoint`` for the extra
finite clusters, and ``CopyPoint`` for points of template copies.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist

from .scales import GoodPair, GoodSequence
from .symbolic import (
    OMEGA,
    BoundaryAddress,
    Exactness,
    TreeSpec,
    Truncation,
    address_from_json,
    address_to_json,
    address_to_path,
    check_proper,
    ends_with_omega,
    iter_truncation,
    tree_from_json,
    weight,
)

TOL = 1e-9


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError("empty interval")

    @property
    def diam(self) -> float:
        return self.hi - self.lo

    def contains(self, other: "Interval", tol: float = 0.0) -> bool:
        if not tol:
            # no float slack, so Fraction endpoints compare exactly
            return self.lo <= other.lo and other.hi <= self.hi
        return self.lo - tol <= other.lo and other.hi <= self.hi + tol


def b_interval(b: GoodSequence, eta: Sequence, origin=0.0, exact: bool = False) -> Interval:
    """The interval I_eta of the b-family rooted at ``origin``.

    Integer children sit to the left of their parent's maximum and move
    further left as the index grows; the omega child hugs the minimum.
    With ``exact`` the endpoints are Fractions, which keeps deep gaps
    resolvable next to large coordinates.
    """
    scale = b.exact if exact else b
    if exact:
        origin = Fraction(origin)
    lo, hi = origin, origin + scale(0) + scale(1)
    level = 0
    for e in eta:
        if e is OMEGA:
            return Interval(lo, lo + scale(level + 1))
        top = lo + scale(level + 1) + scale(level + e - 1)
        lo, hi = top - (scale(level + e) + scale(level + e + 1)), top
        level += e
    return Interval(lo, hi)


@dataclass
class ScaledFamily:
    """I_eta = [lo, hi] / denominator with integer endpoints.

    ``scale[k]`` is b_k * denominator, also an integer, so gap identities
    can be checked in integer arithmetic.
    """

    intervals: dict
    denominator: int
    scale: list


def _family_nodes(tree: TreeSpec, depth: int, width: int):
    """(node, parent, entry, parent level) top-down, plus the deepest level used."""
    out, top = [], 1
    stack = [((), 0)]
    while stack:
        node, level = stack.pop()
        if len(node) >= depth or not tree.has_children(node):
            continue
        for e in tree.children(node, width):
            out.append((node + (e,), node, e, level))
            if e is OMEGA:
                top = max(top, level + 1)
            else:
                top = max(top, level + e + 1)
                stack.append((node + (e,), level + e))
    return out, top


def b_family_scaled(b: GoodSequence, tree: TreeSpec, depth: int, width: int) -> ScaledFamily:
    """The b-family of the truncation over a common denominator, origin 0."""
    nodes, top = _family_nodes(tree, depth, width)
    den = math.lcm(*(b.exact(k).denominator for k in range(top + 1)))
    scale = [b.exact(k).numerator * (den // b.exact(k).denominator) for k in range(top + 1)]
    fam = {(): Interval(0, scale[0] + scale[1])}
    for node, parent, e, level in nodes:
        lo = fam[parent].lo
        if e is OMEGA:
            fam[node] = Interval(lo, lo + scale[level + 1])
        else:
            hi = lo + scale[level + 1] + scale[level + e - 1]
            fam[node] = Interval(hi - scale[level + e] - scale[level + e + 1], hi)
    return ScaledFamily(fam, den, scale)


def b_family(b: GoodSequence, tree: TreeSpec, depth: int, width: int, origin=0.0,
             exact: bool = True) -> dict:
    """I_eta for every node of the truncation, built top-down from the parents."""
    scaled = b_family_scaled(b, tree, depth, width)
    den = scaled.denominator
    if exact:
        shift = Fraction(origin)
        return {k: Interval(shift + Fraction(v.lo, den), shift + Fraction(v.hi, den))
                for k, v in scaled.intervals.items()}
    return {k: Interval(origin + v.lo / den, origin + v.hi / den)
            for k, v in scaled.intervals.items()}


def copy_span(b: GoodSequence, eta: Sequence) -> float:
    """diam I_eta computed from the scales rather than from endpoints."""
    lev = weight(eta[:-1]) if ends_with_omega(tuple(eta)) else weight(eta)
    if ends_with_omega(tuple(eta)):
        return b(lev + 1)
    return b(lev) + b(lev + 1)


@dataclass(frozen=True)
class ClusterPoint:
    """The i-th point of the finite cluster Y_k (both 1-based)."""

    k: int
    i: int

    def sort_key(self):
        return (self.k, self.i)

    def __repr__(self):
        return f"a[{self.k},{self.i}]"


@dataclass(frozen=True)
class CopyPoint:
    """Point ``index`` of the template copy at ``leaf``; -1 for a marker."""

    leaf: BoundaryAddress
    index: int

    def __repr__(self):
        return f"{self.leaf!r}#{self.index}"


def label_address(label) -> tuple | None:
    """Tree address carried by a label, None for cluster points."""
    if isinstance(label, BoundaryAddress):
        return label.prefix
    if isinstance(label, CopyPoint):
        return label.leaf.prefix
    return None


@dataclass(frozen=True)
class LocalPoint:
    """An ideal point of the template copy at ``prefix``.

    ``local`` holds coordinates in the template frame (anchor_min at the
    origin, anchor direction along the first axis) before scaling.
    """

    prefix: tuple
    local: tuple

    def __repr__(self):
        return f"{self.prefix!r}@{self.local!r}"


OMEGA_CODE = 1 << 40
CLUSTER_CODE = -2
PAD_CODE = -1


class HierPoints:
    """Points stored relative to every ancestor in the interval family.

    Row r carries its address digits and ``suffix[r, c]``, the position of
    the point measured from the reference point min I_node + b_{l(node)+1}
    of its length-c ancestor. Two points first differing at digit c are at
    distance |suffix[a, c] - suffix[b, c]| along the first axis, which keeps
    full relative precision no matter how deep the common ancestor is.
    """

    def __init__(self, digits, suffix, extra):
        self.digits = np.asarray(digits, dtype=np.int64)
        self.suffix = np.asarray(suffix, dtype=float)
        self.extra = np.asarray(extra, dtype=float)
        if self.extra.ndim == 1:
            self.extra = self.extra.reshape(len(self.digits), 0)

    def __len__(self):
        return len(self.digits)

    @property
    def depth(self) -> int:
        return self.digits.shape[1]

    def take(self, idx) -> "HierPoints":
        idx = np.asarray(idx, dtype=np.int64)
        return HierPoints(self.digits[idx], self.suffix[idx], self.extra[idx])

    def padded(self, depth: int) -> "HierPoints":
        if depth == self.depth:
            return self
        n = len(self)
        dig = np.full((n, depth), PAD_CODE, dtype=np.int64)
        dig[:, : self.depth] = self.digits
        suf = np.empty((n, depth + 1))
        suf[:, : self.depth + 1] = self.suffix
        suf[:, self.depth + 1:] = self.suffix[:, -1:]
        return HierPoints(dig, suf, self.extra)

    @staticmethod
    def concat(parts) -> "HierPoints":
        depth = max(p.depth for p in parts)
        parts = [p.padded(depth) for p in parts]
        return HierPoints(np.vstack([p.digits for p in parts]),
                          np.vstack([p.suffix for p in parts]),
                          np.vstack([p.extra for p in parts]))

    def first_axis(self, origin: float = 0.0) -> np.ndarray:
        return origin + self.suffix[:, 0]

    def paired(self, ia, other: "HierPoints", ib) -> np.ndarray:
        """Distances between rows ia of self and rows ib of other."""
        if other.depth != self.depth:
            depth = max(self.depth, other.depth)
            return self.padded(depth).paired(ia, other.padded(depth), ib)
        ia = np.asarray(ia, dtype=np.int64)
        ib = np.asarray(ib, dtype=np.int64)
        neq = self.digits[ia] != other.digits[ib]
        lev = np.where(neq.any(axis=1), neq.argmax(axis=1), self.depth)
        d0 = self.suffix[ia, lev] - other.suffix[ib, lev]
        if self.extra.shape[1]:
            de = self.extra[ia] - other.extra[ib]
            return np.sqrt(d0 * d0 + (de * de).sum(axis=1))
        return np.abs(d0)

    def cross(self, other: "HierPoints | None" = None, chunk: int = 1 << 21) -> np.ndarray:
        """Full distance matrix between self and other (default self)."""
        other = self if other is None else other
        n, m = len(self), len(other)
        out = np.empty((n, m))
        rows = max(1, chunk // max(m, 1))
        jb = np.arange(m)
        for start in range(0, n, rows):
            stop = min(n, start + rows)
            ia = np.repeat(np.arange(start, stop), m)
            ib = np.tile(jb, stop - start)
            out[start:stop] = self.paired(ia, other, ib).reshape(stop - start, m)
        return out

    def local(self, level: int) -> np.ndarray:
        """Coordinates measured from the reference of the length-level ancestor."""
        lev = min(level, self.depth)
        return np.column_stack([self.suffix[:, lev], self.extra])


class PointFactory:
    """Builds hierarchical coordinates for labels of one realized space."""

    def __init__(self, b: GoodSequence, template: "TemplateCloud | None" = None,
                 pair: GoodPair | None = None):
        self.b = b
        self.template = template
        self.pair = pair
        if template is not None:
            frame = template.frame()
            self.template_local = (template.points - template.points[template.anchor_min]) @ frame.T
        self.extra_dim = 0 if template is None else template.dim - 1

    def _walk(self, prefix):
        """Digits, per-level terms and the weight of the last integer node."""
        b = self.b
        digits, terms = [], []
        lev = 0
        for e in prefix:
            if e is OMEGA:
                digits.append(OMEGA_CODE)
                terms.append(0.0)
                break
            digits.append(e)
            terms.append(b(lev + e - 1) - b(lev + e))
            lev += e
        return digits, terms, lev

    def row(self, label):
        b = self.b
        extra = np.zeros(self.extra_dim)
        if isinstance(label, ClusterPoint):
            k, i = label.k, label.i
            digits = [k, CLUSTER_CODE, i]
            terms = [b(k - 1) - b(k), 0.0, 0.0]
            pk = self.pair.p(k)
            final = b(k) + 2 * b(k) * pk + 2 * b(k) * (i - 1)
            return digits, terms, final, extra
        if isinstance(label, BoundaryAddress):
            prefix, local = label.prefix, None
        elif isinstance(label, CopyPoint):
            prefix = label.leaf.prefix
            local = None if label.index < 0 else self.template_local[label.index]
        elif isinstance(label, LocalPoint):
            prefix, local = label.prefix, np.asarray(label.local, dtype=float)
        else:
            raise TypeError(f"unsupported label {label!r}")
        digits, terms, lev = self._walk(prefix)
        omega_leaf = ends_with_omega(prefix)
        if local is None:
            final = 0.0 if omega_leaf else b(lev)
        else:
            span = b(lev + 1) if omega_leaf else b(lev) + b(lev + 1)
            scale = span / self.template.diam
            final = scale * local[0] - b(lev + 1)
            extra = scale * local[1:]
        return digits, terms, final, extra

    def build(self, labels) -> HierPoints:
        rows = [self.row(lab) for lab in labels]
        depth = max((len(r[0]) for r in rows), default=0)
        n = len(rows)
        digits = np.full((n, depth), PAD_CODE, dtype=np.int64)
        terms = np.zeros((n, depth + 1))
        extra = np.zeros((n, self.extra_dim))
        for r, (dig, tm, final, ex) in enumerate(rows):
            digits[r, : len(dig)] = dig
            terms[r, : len(tm)] = tm
            terms[r, depth] = final
            extra[r] = ex
        suffix = np.cumsum(terms[:, ::-1], axis=1)[:, ::-1]
        return HierPoints(digits, suffix, extra)


@dataclass
class TemplateCloud:
    """A finite compact template Z with a diameter-realizing anchor pair.

    ``error`` bounds the Hausdorff distance from the finite cloud to the
    continuum it stands for, measured in the template's own scale.
    """

    points: np.ndarray
    anchor_min: int | None = None
    anchor_max: int | None = None
    error: float = 0.0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        self.points = pts
        if len(pts) < 2:
            raise ValueError("template needs at least two points")
        d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
        diam = float(d.max())
        if diam <= 0:
            raise ValueError("template is a single point")
        if self.anchor_min is None or self.anchor_max is None:
            i, j = np.unravel_index(int(np.argmax(d)), d.shape)
            if pts[i, 0] > pts[j, 0]:
                i, j = j, i
            self.anchor_min, self.anchor_max = int(i), int(j)
        if abs(d[self.anchor_min, self.anchor_max] - diam) > 1e-12 * diam:
            raise ValueError("anchors do not realize the diameter")
        self.diam = diam

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def frame(self):
        """Orthogonal map sending the anchor direction to the first axis."""
        u = (self.points[self.anchor_max] - self.points[self.anchor_min]) / self.diam
        e1 = np.zeros_like(u)
        e1[0] = 1.0
        v = u - e1
        if np.linalg.norm(v) < 1e-15:
            return np.eye(len(u))
        return np.eye(len(u)) - 2.0 * np.outer(v, v) / v.dot(v)

    def to_json(self):
        return {"points": self.points.tolist(), "anchor_min": self.anchor_min,
                "anchor_max": self.anchor_max, "error": self.error}

    @staticmethod
    def from_json(data):
        return TemplateCloud(np.asarray(data["points"], dtype=float), data["anchor_min"],
                             data["anchor_max"], float(data.get("error", 0.0)))


def segment_grid(count: int) -> TemplateCloud:
    """``count`` equally spaced points on [0, 1]."""
    pts = np.linspace(0.0, 1.0, count)[:, None]
    return TemplateCloud(pts, 0, count - 1, error=0.5 / (count - 1))


@dataclass
class SpaceApprox:
    """A finite truncation of a realized space."""

    tree: TreeSpec
    b: GoodSequence
    dim: int
    labels: tuple
    coords: np.ndarray
    error_bound: float
    kind: str = "s"
    depth: int = 0
    width: int = 0
    origin: float = 0.0
    template: TemplateCloud | None = None
    pair: GoodPair | None = None
    cluster_points: dict = field(default_factory=dict)
    _index: dict = field(default_factory=dict, repr=False)
    _truncation: Truncation | None = field(default=None, repr=False)
    _hier: HierPoints | None = field(default=None, repr=False)

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float).reshape(len(self.labels), self.dim)
        self._index = {lab: i for i, lab in enumerate(self.labels)}
        if len(self._index) != len(self.labels):
            raise ValueError("labels must be pairwise distinct")

    def __len__(self):
        return len(self.labels)

    @property
    def points(self) -> list:
        return list(zip(self.labels, self.coords))

    def index_of(self, label) -> int:
        return self._index[label]

    def has(self, label) -> bool:
        return label in self._index

    @property
    def truncation(self) -> Truncation:
        if self._truncation is None:
            self._truncation = Truncation(self.tree, self.depth, self.width)
        return self._truncation

    @property
    def factory(self) -> PointFactory:
        return PointFactory(self.b, self.template, self.pair)

    @property
    def hier(self) -> HierPoints:
        """Hierarchical coordinates; for perturbed copies they follow ``coords``."""
        if self._hier is None:
            self._hier = self.factory.build(self.labels)
        return self._hier

    def with_coords(self, coords) -> "SpaceApprox":
        """Same labels, different coordinates (for perturbation experiments)."""
        coords = np.array(coords, float)
        out = SpaceApprox(self.tree, self.b, self.dim, self.labels, coords,
                          self.error_bound, self.kind, self.depth, self.width,
                          self.origin, self.template, self.pair, dict(self.cluster_points))
        base = self.hier
        shift = coords[:, 0] - self.coords[:, 0]
        out._hier = HierPoints(base.digits, base.suffix + shift[:, None], coords[:, 1:])
        return out

    def ideal_point(self, eta: tuple) -> np.ndarray:
        """max I_eta placed on the first axis."""
        p = np.zeros(self.dim)
        p[0] = b_interval(self.b, eta, self.origin).hi
        return p

    # serialization --------------------------------------------------------
    def to_json(self) -> dict:
        pts = []
        for lab, x in zip(self.labels, self.coords):
            rec = {"x": [float(v) for v in x]}
            if isinstance(lab, BoundaryAddress):
                rec.update(addr=address_to_json(lab.prefix), exact=lab.exact)
            elif isinstance(lab, CopyPoint):
                rec.update(addr=address_to_json(lab.leaf.prefix), exact=lab.leaf.exact,
                           copy=lab.index)
            else:
                rec.update(cluster=[lab.k, lab.i])
            pts.append(rec)
        out = {"dim": self.dim, "kind": self.kind, "points": pts,
               "error_bound": self.error_bound, "tree": self.tree.to_json(),
               "b": self.b.to_json(), "depth": self.depth, "width": self.width,
               "origin": self.origin}
        if self.template is not None:
            out["template"] = self.template.to_json()
        if self.pair is not None:
            out["pair"] = self.pair.to_json()
        return out

    @staticmethod
    def from_json(data: dict) -> "SpaceApprox":
        labels, coords, clusters = [], [], {}
        for rec in data["points"]:
            if "cluster" in rec:
                k, i = rec["cluster"]
                lab = ClusterPoint(int(k), int(i))
                clusters.setdefault(lab.k, []).append(len(labels))
            else:
                ex = Exactness.EXACT if rec.get("exact", True) else Exactness.TRUNCATED
                lab = BoundaryAddress(address_from_json(rec["addr"]), ex)
                if "copy" in rec:
                    lab = CopyPoint(lab, int(rec["copy"]))
            labels.append(lab)
            coords.append(rec["x"])
        tmpl = TemplateCloud.from_json(data["template"]) if "template" in data else None
        pair = GoodPair.from_json(data["pair"]) if "pair" in data else None
        space = SpaceApprox(tree_from_json(data["tree"]), GoodSequence.from_json(data["b"]),
                            int(data["dim"]), tuple(labels), np.asarray(coords, float),
                            float(data["error_bound"]), data.get("kind", "s"),
                            int(data.get("depth", 0)), int(data.get("width", 0)),
                            float(data.get("origin", 0.0)), tmpl, pair, clusters)
        hier = space.hier
        canonical = np.column_stack([space.origin + space.b(1) + hier.suffix[:, 0], hier.extra])
        if np.array_equal(canonical, space.coords):
            return space
        # edited coordinates: keep them authoritative for every distance
        stored = space.coords
        space.coords = canonical
        return space.with_coords(stored)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @staticmethod
    def load(path) -> "SpaceApprox":
        with open(path) as fh:
            return SpaceApprox.from_json(json.load(fh))

    def to_csv(self) -> str:
        rows = ["addr,exact,copy,cluster," + ",".join(f"x{i}" for i in range(self.dim))]
        for lab, x in zip(self.labels, self.coords):
            xs = ",".join(repr(float(v)) for v in x)
            if isinstance(lab, ClusterPoint):
                rows.append(f",,,{lab.k}:{lab.i},{xs}")
            else:
                leaf = lab if isinstance(lab, BoundaryAddress) else lab.leaf
                cp = lab.index if isinstance(lab, CopyPoint) else ""
                rows.append(f"{address_to_path(leaf.prefix)},{int(leaf.exact)},{cp},,{xs}")
        return "\n".join(rows) + "\n"


# ----------------------------------------------------------------- builders

def truncation_error_bound(tree: TreeSpec, b: GoodSequence, depth: int, width: int) -> float:
    """Largest Hausdorff contribution of anything the truncation cut away.

    Width cuts below a node xi are within b_{l(xi)+N-1} of the kept omega
    leaf; a depth marker at eta stands for a set inside I_eta.
    """
    bound = 0.0
    for node, role in iter_truncation(tree, depth, width):
        if role == "leaf":
            continue
        lev = weight(node)
        if role == "marker":
            bound = max(bound, b(lev) + b(lev + 1))
        elif tree.has_child_beyond(node, width):
            bound = max(bound, b(lev + tree.width_at(node, width) - 1))
    return bound


def _check_realizable(tree: TreeSpec, depth: int, width: int):
    if tree.proper_by_construction:
        rep = check_proper(tree, depth, width)
        if not rep.ok:
            raise ValueError(f"improper tree: {rep.violations[:3]}")


def realize_s_space(tree: TreeSpec, b: GoodSequence, depth: int, width: int,
                    origin: float = 0.0) -> SpaceApprox:
    """One point max I_eta per truncated boundary point."""
    _check_realizable(tree, depth, width)
    trunc = Truncation(tree, depth, width)
    labels = tuple(trunc.boundary)
    return _assemble(tree, b, labels, truncation_error_bound(tree, b, depth, width), "s",
                     depth, width, origin, trunc=trunc)


def _assemble(tree, b, labels, err, kind, depth, width, origin, template=None, pair=None,
              clusters=None, trunc=None) -> SpaceApprox:
    hier = PointFactory(b, template, pair).build(labels)
    coords = np.column_stack([origin + b(1) + hier.suffix[:, 0], hier.extra])
    return SpaceApprox(tree, b, coords.shape[1], tuple(labels), coords, err, kind, depth,
                       width, origin, template, pair, clusters or {}, _truncation=trunc,
                       _hier=hier)


def realize_bp_space(tree: TreeSpec, pair: GoodPair, depth: int, width: int,
                     origin: float = 0.0) -> SpaceApprox:
    """Scattered part plus clusters Y_k to the right of I_(k), k <= width."""
    if width > pair.K:
        raise ValueError(f"pair is only certified up to K={pair.K} < width {width}")
    b = pair.b
    base = realize_s_space(tree, b, depth, width, origin)
    labels = list(base.labels)
    clusters = {}
    for k in range(1, width + 1):
        if not tree.contains((k,)):
            raise ValueError(f"tree has no child ({k}) to attach a cluster to")
        pk = pair.p(k)
        if k >= 2:
            # right end of Y_k against the left end of I_(k-1), both from max I_(k)
            reach = 2 * b(k) * pk + 2 * b(k) * (pk - 1)
            room = b(k - 2) - 2 * b(k - 1) - b(k)
            if reach >= room:
                raise ValueError(f"cluster Y_{k} collides with I_({k - 1})")
        clusters[k] = list(range(len(labels), len(labels) + pk))
        labels.extend(ClusterPoint(k, i + 1) for i in range(pk))
    err = max(base.error_bound, 1.25 * b(width))
    return _assemble(tree, b, labels, err, "bp", depth, width, origin, pair=pair,
                     clusters=clusters, trunc=base.truncation)


def realize_z_space(tree: TreeSpec, b: GoodSequence, template: TemplateCloud, depth: int,
                    width: int, origin: float = 0.0) -> SpaceApprox:
    """A similar copy of the template at every exact leaf.

    The copy at eta sends anchor_min to min I_eta and anchor_max to
    max I_eta on the first axis; depth markers get the single point max I_eta.
    """
    _check_realizable(tree, depth, width)
    trunc = Truncation(tree, depth, width)
    labels = []
    max_scale = 0.0
    for lab in trunc.boundary:
        if lab.exact:
            max_scale = max(max_scale, copy_span(b, lab.prefix) / template.diam)
            labels.extend(CopyPoint(lab, j) for j in range(len(template.points)))
        else:
            labels.append(CopyPoint(lab, -1))
    err = truncation_error_bound(tree, b, depth, width) + template.error * max_scale
    return _assemble(tree, b, labels, err, "z", depth, width, origin, template=template,
                     trunc=trunc)


def copy_similitude(space: SpaceApprox, eta: tuple):
    """(scale, offset) with x = offset + scale * frame @ (z - z_min) for the copy at eta."""
    t = space.template
    iv = b_interval(space.b, eta, space.origin)
    offset = np.zeros(space.dim)
    offset[0] = iv.lo
    return copy_span(space.b, eta) / t.diam, offset


# ------------------------------------------------------------- verification

@dataclass
class Check:
    name: str
    node: object
    lhs: float
    rhs: float
    relation: str  # "<=" or ">="

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs if self.relation == "<=" else self.lhs - self.rhs

    def passed(self, tol: float = TOL) -> bool:
        # tolerance is relative to the size of the compared quantities
        return self.margin >= -tol * max(abs(self.lhs), abs(self.rhs), 1e-300)


@dataclass
class ConditionReport:
    checks: list
    tol: float = TOL

    @property
    def failures(self) -> list:
        return [c for c in self.checks if not c.passed(self.tol)]

    @property
    def ok(self) -> bool:
        return not self.failures

    def __bool__(self):
        return self.ok

    def min_margin(self, name: str | None = None) -> float:
        vals = [c.margin for c in self.checks if name is None or c.name == name]
        return min(vals) if vals else float("inf")

    def summary(self) -> dict:
        names = sorted({c.name for c in self.checks})
        return {n: {"count": sum(c.name == n for c in self.checks),
                    "min_margin": self.min_margin(n),
                    "failures": sum(1 for c in self.failures if c.name == n)} for n in names}


def _diam(pts: np.ndarray) -> float:
    if len(pts) < 2:
        return 0.0
    if pts.shape[1] == 1:
        return float(pts.max() - pts.min())
    return float(pdist(pts).max())


def _dist(a: np.ndarray, c: np.ndarray) -> float:
    if a.shape[1] == 1:
        xs = np.sort(c[:, 0])
        q = a[:, 0]
        pos = np.searchsorted(xs, q)
        lo = np.abs(q - xs[np.clip(pos - 1, 0, len(xs) - 1)])
        hi = np.abs(xs[np.clip(pos, 0, len(xs) - 1)] - q)
        return float(np.minimum(lo, hi).min())
    d, _ = cKDTree(c).query(a)
    return float(d.min())


def _groups_by_prefix(space: SpaceApprox) -> dict:
    groups: dict = {}
    for i, lab in enumerate(space.labels):
        addr = label_address(lab)
        if addr is None:
            continue
        for j in range(len(addr) + 1):
            groups.setdefault(addr[:j], []).append(i)
    return {k: np.asarray(v) for k, v in groups.items()}


def verify_space_conditions(space: SpaceApprox, tol: float = TOL) -> ConditionReport:
    """Separation (iii), diameter (iv), the omega-leaf inequalities and more.

    Copy-diameter checks are added for template spaces and the cluster
    inequalities for spaces with clusters. All distances below a node are
    taken in that node's local coordinates.
    """
    b = space.b
    hier = space.hier
    groups = _groups_by_prefix(space)
    checks = []
    for node, role in iter_truncation(space.tree, space.depth, space.width):
        if role != "interior":
            continue
        X = hier.local(len(node))
        lev = weight(node)
        kids = space.tree.children(node, space.width)
        present = [c for c in kids if node + (c,) in groups]
        for k in present:
            if k is OMEGA:
                continue
            later = [c for c in present if c > k]
            here = X[groups[node + (k,)]]
            if later:
                rest = X[np.concatenate([groups[node + (c,)] for c in later])]
                gap = b(lev + k - 1) - 2 * b(lev + k) - b(lev + k + 1)
                checks.append(Check("separation", node + (k,), _dist(here, rest), gap, ">="))
            # the diameter bound runs over integer siblings only
            finite = [c for c in later if c is not OMEGA]
            union = np.vstack([here] + [X[groups[node + (c,)]] for c in finite])
            checks.append(Check("diameter", node + (k,), _diam(union), b(lev + k - 1), "<="))
        if OMEGA in present:
            checks.extend(_omega_checks(space, node, groups, X))
    if space.kind == "z":
        checks.extend(_copy_checks(space))
    if space.kind == "bp":
        checks.extend(_cluster_checks(space, groups))
    return ConditionReport(checks, tol)


def _omega_checks(space, node, groups, X):
    inner = groups[node + (OMEGA,)]
    outer = np.setdiff1d(groups[node], inner)
    if len(outer) == 0:
        return []
    if space.kind == "z":
        leaf = BoundaryAddress(node + (OMEGA,), Exactness.EXACT)
        base = X[space.index_of(CopyPoint(leaf, space.template.anchor_max))]
    else:
        base = X[inner[0]]
    xs, ys = X[inner], X[outer]
    dxy = np.linalg.norm(xs[:, None, :] - ys[None, :, :], axis=-1)
    dy = np.linalg.norm(ys - base, axis=-1)[None, :]
    dx = np.linalg.norm(xs - base, axis=-1)[:, None]
    # reported as ratios against the factors 2 and 3
    return [Check("omega_pull_2", node, float((dy / dxy).max()), 2.0, "<="),
            Check("omega_pull_3", node, float((dx / dxy).max()), 3.0, "<=")]


def _copy_checks(space):
    b = space.b
    out = []
    by_leaf: dict = {}
    for i, lab in enumerate(space.labels):
        if lab.leaf.exact:
            by_leaf.setdefault(lab.leaf.prefix, []).append(i)
    for eta, idx in by_leaf.items():
        d = _diam(space.hier.local(len(eta))[idx])
        if ends_with_omega(eta):
            target = b(weight(eta[:-1]) + 1)
            name = "copy_diam_omega"
        else:
            lev = weight(eta)
            target = b(lev) + b(lev + 1)
            name = "copy_diam"
        out.append(Check(name, eta, d, target, "<="))
        out.append(Check(name, eta, d, target, ">="))
    return out


def _cluster_checks(space, groups):
    b = space.b
    X = space.hier.local(0)
    out = []
    N = space.width
    omega_pts = X[groups[(OMEGA,)]]

    def zset(k):
        return np.vstack([X[groups[(k,)]], X[space.cluster_points[k]]])

    for k in range(1, N + 1):
        zk = zset(k)
        out.append(Check("cluster_i", k, _diam(zk), b(k - 1) / 8, "<="))
        rest = np.vstack([zset(j) for j in range(k + 1, N + 1)] + [omega_pts])
        out.append(Check("cluster_ii", k, _dist(zk, rest), 2 * b(k - 1) / 3, ">="))
        out.append(Check("cluster_iii", k, _diam(np.vstack([zk, rest])), 1.25 * b(k - 1), "<="))
        xk, yk = X[groups[(k,)]], X[space.cluster_points[k]]
        out.append(Check("cluster_iv_a", k, _diam(xk), _diam(yk), "<="))
        out.append(Check("cluster_iv_b", k, _diam(yk), _dist(xk, yk), "<="))
        gap = _dist(xk, yk)
        out.append(Check("cluster_offset", k, gap, 2 * b(k) * space.pair.p(k), "<="))
        out.append(Check("cluster_offset", k, gap, 2 * b(k) * space.pair.p(k), ">="))
    return out

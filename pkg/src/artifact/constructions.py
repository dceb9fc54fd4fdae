"""Concrete GIFS constructions on realized spaces, plus a few diagnostics.

Every symbolic map here works on ideal addresses, possibly open (a depth
marker stands for an address whose tail is unknown), and only snaps the
result onto the host truncation at the very end.
"""

from __future__ import annotations

import itertools
import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .gifs_engine import (
    ConstantMap,
    DispatchMap,
    Gifs,
    LiftedMap,
    PointSet,
    PrecomposedMap,
    Resolver,
    TupleMap,
    UnaryMap,
    as_pointset,
    combine_separated,
    component_quotient,
    hausdorff,
    hutchinson_step,
    lipschitz_estimate,
    quotient_gifs,
)
from .realization import (
    ClusterPoint,
    CopyPoint,
    LocalPoint,
    SpaceApprox,
    TemplateCloud,
    realize_bp_space,
    realize_s_space,
    realize_z_space,
    segment_grid,
    verify_space_conditions,
)
from .scales import GoodPair, GoodSequence, PSequence
from .symbolic import (
    OMEGA,
    BoundaryAddress,
    Exactness,
    LambdaAlpha,
    LambdaAlphaN,
    LambdaS,
    OrdinalIndex,
    TreeSpec,
    address_key,
    format_address,
    ladder,
)

EXACT = Exactness.EXACT
TRUNC = Exactness.TRUNCATED


# ------------------------------------------------------- address plumbing

def open_address(label) -> tuple:
    """(prefix, is_open) of a scattered host label."""
    if isinstance(label, BoundaryAddress):
        return label.prefix, label.is_open
    if isinstance(label, CopyPoint):
        return label.leaf.prefix, label.leaf.is_open
    raise TypeError(f"{label!r} has no tree address")


def project_address(tree: TreeSpec, eta: tuple, is_open: bool = False) -> tuple:
    """Send an ideal address to a boundary address of ``tree``.

    Keep the longest prefix lying in ``tree``; if it is a leaf, stop there,
    otherwise continue with the largest child, which is omega. An open
    address that stays inside ``tree`` remains open.
    """
    j = 0
    while j < len(eta) and tree.contains(eta[: j + 1]):
        j += 1
    xi = eta[:j]
    if j == len(eta) and is_open:
        return xi, True
    if not tree.has_children(xi):
        return xi, False
    if not tree.contains(xi + (OMEGA,)):
        raise ValueError(f"{format_address(xi)} has no omega child")
    return xi + (OMEGA,), False


def shift_first(eta: tuple, by: int) -> tuple:
    """Lower the first entry by ``by`` (omega stays omega)."""
    if not eta or eta[0] is OMEGA:
        return eta
    return (eta[0] - by,) + eta[1:]


def _bump(e, by):
    return e if e is OMEGA else e + by


class Snapper:
    """Turns ideal (prefix, open) pairs into host labels."""

    def __init__(self, space: SpaceApprox):
        self.space = space
        self.trunc = space.truncation

    def __call__(self, addr) -> BoundaryAddress:
        prefix, is_open = addr
        return self.trunc.snap(prefix, is_open)


def _first(eta):
    return eta[0] if eta else OMEGA


def smallest_label(labels, pred=lambda lab: True):
    """Lexicographically smallest boundary label satisfying ``pred``."""
    cands = [lab for lab in labels if isinstance(lab, BoundaryAddress) and pred(lab)]
    if not cands:
        raise ValueError("no admissible point")
    return min(cands, key=lambda lab: address_key(lab.prefix))


# ----------------------------------------------------------- engine glue

def subtree_projection(host: SpaceApprox, target_tree: TreeSpec, target: SpaceApprox | None = None,
                       prefix: tuple = (), claimed_lip=None, name="projection") -> UnaryMap:
    """x_eta -> x_{prefix + R(eta)} with R the longest-prefix-then-omega rule.

    The image is snapped onto ``target`` (the host itself by default).
    """
    target = host if target is None else target
    for lab in target.truncation.boundary:
        p = lab.prefix
        if p[: len(prefix)] != prefix or not target_tree.contains(p[len(prefix):]):
            raise ValueError(f"target point {format_address(p)} outside the target tree")
    snap = Snapper(target)
    resolver = Resolver(target)

    def rule(label):
        eta, is_open = open_address(label)
        xi, op = project_address(target_tree, eta, is_open)
        return snap((prefix + xi, op))

    return UnaryMap(resolver, rule, claimed_lip, name)


def assemble_dispatch(resolver: Resolver, h: Callable, h_omega, key_fn: Callable,
                      claimed_lip=None, name="F") -> DispatchMap:
    """F(x, y) = h_{k+1}(x) when y lies in the k-th piece, k = key_fn(y).

    ``h(k)`` returns a label function for finite k; ``h_omega`` is either a
    label (constant) or a label function used when k is omega.
    """
    def branch(k, label):
        if k is OMEGA:
            return h_omega(label) if callable(h_omega) else h_omega
        return h(k + 1)(label)

    return DispatchMap(resolver, key_fn, branch, claimed_lip, name)


# --------------------------------------------------------------- bundles

@dataclass
class Bundle:
    space: SpaceApprox
    gifs: Gifs
    witnesses: dict
    recipe: dict
    lam: float
    extras: dict = field(default_factory=dict)

    def attractor_check(self) -> dict:
        """Exact label-set comparison of the Hutchinson image with the host."""
        img = hutchinson_step(self.gifs, self.space)
        got = set(img.labels)
        want = set(self.space.labels)
        return {"exact": got == want, "missing": sorted(map(repr, want - got))[:10],
                "extra": sorted(map(repr, got - want))[:10], "size": len(want)}

    def lipschitz(self, names=None, seed: int = 0) -> dict:
        out = {}
        for name, (f, sample) in self.lip_targets().items():
            if names is not None and name not in names:
                continue
            est = lipschitz_estimate(f, sample, seed=seed)
            out[name] = {"measured": est.value, "regime": est.regime,
                         "claimed": f.claimed_lip}
        return out

    def lip_targets(self) -> dict:
        return {name: (f, self.space) for name, f in self.witnesses.items()}

    def report(self, measure: bool = True, seed: int = 0) -> dict:
        rep = {"recipe": self.recipe, "points": len(self.space),
               "error_bound": self.space.error_bound, "lambda_b": self.lam,
               "attractor": self.attractor_check()}
        cond = verify_space_conditions(self.space)
        rep["conditions"] = cond.summary()
        if measure:
            rep["lipschitz"] = self.lipschitz(seed=seed)
        rep.update(self.extras)
        return rep

    def gifs_descriptor(self) -> dict:
        return {"order": self.gifs.order, "recipe": self.recipe,
                "maps": [dict(f.describe(), host="space.json") for f in self.gifs.maps]}

    def save(self, directory, measure: bool = True, seed: int = 0) -> dict:
        os.makedirs(directory, exist_ok=True)
        self.space.save(os.path.join(directory, "space.json"))
        rep = self.report(measure, seed)
        with open(os.path.join(directory, "gifs.json"), "w") as fh:
            json.dump(self.gifs_descriptor(), fh, indent=1)
        with open(os.path.join(directory, "witnesses.json"), "w") as fh:
            json.dump({k: f.describe() for k, f in self.witnesses.items()}, fh, indent=1)
        with open(os.path.join(directory, "report.json"), "w") as fh:
            json.dump(rep, fh, indent=1, default=str)
        return rep


ScatteredGifsBundle = Bundle


# ------------------------------------------- scattered spaces, two maps

class _AlphaRules:
    """Address-level F and G for a LambdaAlpha space (single top copy)."""

    def __init__(self, tree: TreeSpec):
        self.tree = tree
        self._sub: dict = {}

    def child_tree(self, k: int) -> TreeSpec:
        t = self._sub.get(k)
        if t is None:
            if isinstance(self.tree, LambdaAlpha):
                t = LambdaAlpha(ladder(self.tree.alpha, k))
            else:
                from .symbolic import subtree_shift1
                t = subtree_shift1(self.tree, (k,))
            self._sub[k] = t
        return t

    def h(self, k, addr):
        eta, is_open = addr
        xi, op = project_address(self.child_tree(k), eta, is_open)
        return (k,) + xi, op

    def F(self, x, y):
        k = _first(y[0])
        if k is OMEGA:
            return (OMEGA,), False
        return self.h(k + 1, x)

    def G(self, x):
        return self.h(1, x)


def _embedded(addr, prefix=(), shift=0):
    eta, op = addr
    if shift:
        eta = shift_first(eta, -shift)
    return prefix + eta, op


def _local(addr, prefix_len=0, shift=0):
    eta, op = addr
    eta = eta[prefix_len:]
    if shift:
        eta = shift_first(eta, shift)
    return eta, op


def _scattered_maps(alpha: OrdinalIndex, n: int, space: SpaceApprox, resolver: Resolver, lam):
    snap = Snapper(space)
    addr = open_address
    base = LambdaAlpha(alpha)
    if alpha.k == 0:
        # the one-point space is the attractor of a single constant map
        G = ConstantMap(resolver, smallest_label(space.labels), 2, "G")
        return [G], {"G": G}
    rules = _AlphaRules(base)
    if n == 1:
        G = UnaryMap(resolver, lambda x: snap(rules.G(addr(x))), lam / 4, "G")
        F = DispatchMap(resolver, lambda y: _first(addr(y)[0]),
                        lambda k, x: snap(rules.F(addr(x), ((k,), False))), lam / 2, "F")
        G2 = LiftedMap(G, 2)
        return [F, G2], {"F": F, "G": G}

    in1 = lambda lab: _first(addr(lab)[0]) == 1
    alpha1 = LambdaAlpha(ladder(alpha, 1))
    rest_tree = base if n == 2 else LambdaAlphaN(alpha, n - 1)
    x1_labels = [lab for lab in space.labels if in1(lab)]
    z = smallest_label(x1_labels)

    def P_key(y):
        a = addr(y)
        if not in1(y):
            return ("out",)
        return ("in", _first(a[0][1:]))

    def P_branch(key, x):
        a = addr(x)
        if not in1(x):
            loc = _local(a, 0, 1)
            xi, op = project_address(alpha1, *loc)
            return snap(((1, 1) + xi, op))
        if key[0] == "out":
            return z
        return snap(_embedded(rules.F(_local(a, 1), ((key[1],), False)), (1,)))

    P = DispatchMap(resolver, P_key, P_branch, lam, "P")

    if n == 2:
        tilde = [lab for lab in space.labels if not in1(lab)]
        z2 = smallest_label(tilde)

        def Q_key(y):
            a = addr(y)
            if in1(y):
                return ("out",)
            return ("in", _first(_local(a, 0, 1)[0]))

        def Q_branch(key, x):
            a = addr(x)
            if in1(x):
                xi, op = project_address(alpha1, *_local(a, 1))
                return snap(_embedded(((1,) + xi, op), (), 1))
            if key[0] == "out":
                return z2
            loc = rules.F(_local(a, 0, 1), ((key[1],), False))
            return snap(_embedded(loc, (), 1))
    else:
        zq = smallest_label(space.labels, lambda lab: _first(lab.prefix) == n - 1)

        def Q_key(y):
            return ("in1",) if in1(y) else ("out",)

        def Q_branch(key, x):
            eta, op = addr(x)
            i = _first(eta)
            if key[0] == "in1" and i is not OMEGA and i <= n - 2:
                return snap(((i + 1,) + eta[1:], op))
            if key[0] == "out" and i == 1:
                xi, o2 = project_address(base, eta[1:], op)
                return snap(_embedded((xi, o2), (), n - 1))
            return zq

    Q = DispatchMap(resolver, Q_key, Q_branch, lam, "Q")
    return [P, Q], {"P": P, "Q": Q}


def gifs_scattered(alpha: OrdinalIndex, n: int, b: GoodSequence, depth: int, width: int,
                   origin: float = 0.0) -> Bundle:
    """Two maps of order 2 whose attractor is the (alpha, n) scattered space."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if alpha.k == 0 and n >= 2:
        raise ValueError("alpha = 0 with n >= 2 is a finite set; use a finite IFS")
    tree = LambdaAlpha(alpha) if n == 1 else LambdaAlphaN(alpha, n)
    space = realize_s_space(tree, b, depth, width, origin)
    resolver = Resolver(space)
    lam = b.lam_float
    maps, wit = _scattered_maps(alpha, n, space, resolver, lam)
    recipe = {"recipe": "scattered", "alpha": alpha.to_json(), "n": n, "b": b.to_json(),
              "depth": depth, "width": width}
    bundle = Bundle(space, Gifs(maps), wit, recipe, lam)
    bundle.rebuild = lambda host, res: _scattered_maps(alpha, n, host, res, lam)
    return bundle


# --------------------------------------------- sandwiched compact sets

def surgery(eta: tuple, k: int, is_open: bool = False) -> tuple:
    """Raise the first entry by two and lower the k-th entry by one."""
    if len(eta) < k:
        return (_bump(eta[0], 2),) + eta[1:], is_open
    head = (_bump(eta[0], 2),) + eta[1:k - 1]
    ek = eta[k - 1]
    return head + (ek if ek is OMEGA else ek - 1,) + eta[k:], is_open


def surgery_prefixed(eta: tuple, i: int, k: int, is_open: bool = False) -> tuple:
    """Prepend i and lower the (k-1)-th entry by one."""
    if len(eta) < k - 1:
        return (i,) + eta, is_open
    ek = eta[k - 2]
    return (i,) + eta[: k - 2] + (ek if ek is OMEGA else ek - 1,) + eta[k - 1:], is_open


def _sandwich_ok(tree: TreeSpec, space: SpaceApprox) -> list:
    from .symbolic import LambdaR
    bad = []
    outer, inner = LambdaR(), LambdaS()
    for node, _ in _iter_nodes(space):
        if not outer.contains(node):
            bad.append(("outside", node))
    for lab in realize_s_space(inner, space.b, space.depth, space.width).labels:
        if not tree.contains(lab.prefix):
            bad.append(("missing", lab.prefix))
    return bad


def _iter_nodes(space):
    from .symbolic import iter_truncation
    return iter_truncation(space.tree, space.depth, space.width)


def _sandwiched_maps(space: SpaceApprox, resolver: Resolver, lam):
    tree = space.tree
    snap = Snapper(space)
    inner = LambdaS()
    addr = open_address

    def r(a):
        return project_address(inner, *a)

    def r_prime(a):
        return project_address(tree, *a)

    def key(y):
        return _first(r(addr(y))[0])

    def m_piece(i):
        if i == 4:
            return lambda lab: _first(lab.prefix) is OMEGA or _first(lab.prefix) >= 4
        return lambda lab: _first(lab.prefix) == i

    maps, wit = [], {}
    for i in (2, 3, 4):
        const = smallest_label(space.labels, m_piece(i))
        if i == 4:
            step = lambda k, a: surgery(a[0], k, a[1])
            limit = lambda a: ((_bump(a[0][0], 2),) + a[0][1:], a[1])
        else:
            step = (lambda i_: lambda k, a: surgery_prefixed(a[0], i_, k, a[1]))(i)
            limit = (lambda i_: lambda a: ((i_,) + a[0], a[1]))(i)

        def branch(k, x, step=step, limit=limit, const=const):
            a = r(addr(x))
            if k is OMEGA:
                return snap(r_prime(limit(a)))
            hk = k + 1
            if hk == 2:
                return const
            return snap(r_prime(step(hk - 1, a)))

        G = DispatchMap(resolver, key, branch, lam, f"G{i}")
        maps.append(G)
        wit[f"G{i}"] = G
    F = UnaryMap(resolver, lambda x: snap(r_prime(((1,) + r(addr(x))[0], r(addr(x))[1]))),
                 lam, "F")
    maps.append(LiftedMap(F, 2))
    wit["F"] = F
    return maps, wit


def gifs_sandwiched(tree: TreeSpec, b: GoodSequence, depth: int, width: int,
                    origin: float = 0.0) -> Bundle:
    """Four maps for a compact set sandwiched between the no-ones and one-one trees."""
    space = realize_s_space(tree, b, depth, width, origin)
    bad = _sandwich_ok(tree, space)
    if bad:
        raise ValueError(f"sandwich condition violated: {bad[:3]}")
    resolver = Resolver(space)
    lam = b.lam_float
    maps, wit = _sandwiched_maps(space, resolver, lam)
    recipe = {"recipe": "sandwiched", "tree": tree.to_json(), "b": b.to_json(),
              "depth": depth, "width": width}
    bundle = Bundle(space, Gifs(maps), wit, recipe, lam)
    bundle.rebuild = lambda host, res: _sandwiched_maps(host, res, lam)
    return bundle


# ------------------------------------------------ scattered plus clusters

def lexicographic_surjection(domain: list, targets: list) -> dict:
    """Assign domain tuples (in the given order) cyclically to the targets."""
    if len(domain) < len(targets):
        raise ValueError(f"only {len(domain)} tuples for {len(targets)} points")
    return {t: targets[j % len(targets)] for j, t in enumerate(domain)}


def _mixed_maps(M_bundle, space: SpaceApprox, resolver: Resolver, pair: GoodPair, m: int):
    N = space.width
    lam = pair.b.lam_float
    clusters = {k: [ClusterPoint(k, i + 1) for i in range(pair.p(k))] for k in range(1, N + 1)}
    x_omega = BoundaryAddress((OMEGA,), EXACT)
    z = {k: smallest_label(space.labels, lambda lab, k=k: _first(lab.prefix) == k)
         for k in range(1, N + 1)}

    def pi1(lab):
        return z[lab.k] if isinstance(lab, ClusterPoint) else lab

    def pi2(lab):
        if isinstance(lab, ClusterPoint):
            return lab
        k = _first(lab.prefix)
        return x_omega if k is OMEGA else ClusterPoint(k, 1)

    # lexicographic cyclic surjections G_{k-1} -> Y_k
    table = {}
    for k in range(2, N + 1):
        pool = [p for j in range(1, k) for p in clusters[j]]
        dom = [t for t in itertools.product(pool, repeat=m) if max(p.k for p in t) == k - 1]
        table.update(lexicographic_surjection(dom, clusters[k]))

    def F_rule(*t):
        if any(not isinstance(p, ClusterPoint) for p in t):
            return x_omega
        # tuples reaching the last retained cluster land past the truncation
        return table.get(t, x_omega)

    FY = TupleMap(resolver, F_rule, m, lam, "F_Y")
    FY_full = PrecomposedMap(FY, pi2, 2 * lam, "F_Y∘pi2")
    consts = [ConstantMap(resolver, p, m, f"const_Y1_{p.i}") for p in clusters[1]]
    inner, wit = M_bundle.rebuild(space, resolver)
    lifted = []
    for f in inner:
        g = LiftedMap(f, m) if f.order < m else f
        lip = None if f.claimed_lip is None else 2 * f.claimed_lip
        lifted.append(PrecomposedMap(g, pi1, lip, f"{f.name}∘pi1"))
    maps = lifted + [FY_full] + consts
    witnesses = {f"M_{k}": v for k, v in wit.items()}
    witnesses["F"] = FY
    witnesses["F∘pi2"] = FY_full
    y_labels = [p for k in clusters for p in clusters[k]] + [x_omega]
    return maps, witnesses, y_labels


def nonattractor_bound(p: PSequence, m: int, n_max: int) -> list:
    """c_n = (1 + p_1 + ... + p_{n-1} + n 2^n)^m / p_n as exact fractions."""
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    out, acc = [], 1
    for n in range(1, n_max + 1):
        out.append(Fraction((acc + n * 2 ** n) ** m, p(n)))
        acc += p(n)
    return out


def gifs_mixed(M_bundle: Bundle, pair: GoodPair, m: int, depth: int, width: int,
               origin: float = 0.0) -> Bundle:
    """Order-m system on the scattered part plus finite clusters Y_k."""
    if m < 2:
        raise ValueError("m must be >= 2")
    if pair.b != M_bundle.space.b:
        raise ValueError("the pair must use the bundle's scale sequence")
    for k in range(1, width):
        if pair.p(k + 1) > pair.p(k) ** m:
            raise ValueError(f"p_{k + 1} > p_{k}^m")
    space = realize_bp_space(M_bundle.space.tree, pair, depth, width, origin)
    for k in list(range(2, width + 1)) + [OMEGA]:
        if not any(isinstance(l, BoundaryAddress) and _first(l.prefix) == k for l in space.labels):
            raise ValueError(f"M misses the piece {k}")
    resolver = Resolver(space)
    maps, wit, y_labels = _mixed_maps(M_bundle, space, resolver, pair, m)
    recipe = {"recipe": "mixed", "base": M_bundle.recipe, "pair": pair.to_json(), "m": m,
              "depth": depth, "width": width}
    profile = nonattractor_bound(pair.p, m - 1, 6)
    bundle = Bundle(space, Gifs(maps), wit, recipe, pair.b.lam_float,
                    {"bound_profile": [str(c) for c in profile]})
    full = as_pointset(space)
    y_set = full.take([space.index_of(l) for l in y_labels])
    m_set = full.take([i for i, l in enumerate(space.labels) if isinstance(l, BoundaryAddress)])
    samples = {"F": y_set, "F∘pi2": full}
    targets = {name: (f, samples.get(name, m_set)) for name, f in wit.items()}
    bundle.lip_targets = lambda: targets
    bundle.bound_profile = profile
    return bundle


MixedGifsBundle = Bundle


# --------------------------------------------- template copies everywhere

def component_R(k: int, xi: tuple, is_open: bool = False) -> tuple:
    """The four-case address map onto the k-th piece."""
    if xi == (OMEGA,):
        return (k, OMEGA)
    i = xi[0]
    if i <= k - 1:
        return (k,) + xi
    nxt = xi[1] if len(xi) >= 2 else (1 if is_open else None)
    if nxt == k - 1 and len(xi) >= 2:
        return (k, i) + xi[2:]
    return (k, i, OMEGA)


def _component_case(k, xi, is_open):
    """'similar' where the piece is copied, 'constant' where it collapses."""
    if xi == (OMEGA,) or xi[0] <= k - 1:
        return "similar"
    nxt = xi[1] if len(xi) >= 2 else (1 if is_open else None)
    return "similar" if nxt == k - 1 else "constant"


def lip_of_template_maps(maps, template: TemplateCloud) -> float:
    pts = template.points
    worst = 0.0
    for fn, order in maps:
        args = [pts] * order
        grid = np.indices((len(pts),) * order).reshape(order, -1)
        xs = [pts[g] for g in grid]
        img = np.asarray(fn(*xs), float).reshape(len(grid[0]), -1)
        for a, c in itertools.combinations(range(len(img)), 2):
            den = max(np.linalg.norm(xs[j][a] - xs[j][c]) for j in range(order))
            if den > 0:
                worst = max(worst, np.linalg.norm(img[a] - img[c]) / den)
    return worst


def default_segment_ifs(copies: int = 4):
    """x -> (x + i)/copies on [0, 1], one map per i."""
    return [((lambda i: lambda x: (x + i) / copies)(i), 1) for i in range(copies)]


def _component_maps(space: SpaceApprox, resolver: Resolver, template_maps, lam, lip_z):
    t = space.template
    frame = t.frame()
    zmin = t.points[t.anchor_min]
    local_pts = space.factory.template_local
    top = t.anchor_max

    def local_of(lab):
        if isinstance(lab, CopyPoint):
            return None if lab.index < 0 else local_pts[lab.index]
        if isinstance(lab, LocalPoint):
            return np.asarray(lab.local, float)
        raise TypeError(lab)

    def prefix_of(lab):
        if isinstance(lab, CopyPoint):
            return lab.leaf.prefix, lab.leaf.is_open
        return lab.prefix, False

    def to_template(u):
        return u @ frame + zmin  # frame is symmetric and orthogonal

    def to_local(zv):
        return (zv - zmin) @ frame.T

    def point_at(prefix, u, is_open=False, index=None):
        if index is not None:
            leaf = BoundaryAddress(prefix, TRUNC if is_open else EXACT)
            return CopyPoint(leaf, index)
        return LocalPoint(prefix, tuple(float(v) for v in u))

    def anchor(prefix):
        return CopyPoint(BoundaryAddress(prefix, EXACT), top)

    def g(k):
        def rule(lab):
            xi, is_open = prefix_of(lab)
            case = _component_case(k, xi, is_open)
            if case == "constant":
                return anchor(component_R(k, xi, is_open))
            target = component_R(k, xi, is_open)
            if isinstance(lab, CopyPoint):
                leaf = BoundaryAddress(target, TRUNC if is_open else EXACT)
                return CopyPoint(leaf, lab.index)
            return LocalPoint(target, lab.local)
        return rule

    x_omega = anchor((OMEGA,))

    def key(lab):
        return _first(prefix_of(lab)[0])

    F = DispatchMap(resolver, key, lambda k, x: x_omega if k is OMEGA else g(k + 1)(x),
                    lam / 2, "F")

    def on_copy(prefix, fn, order):
        def proj(lab):
            p, _ = prefix_of(lab)
            u = local_of(lab) if p == prefix else None
            if u is None:
                u = local_pts[top]
            return LocalPoint(prefix, tuple(float(v) for v in u))

        def rule(*labs):
            zs = [to_template(np.asarray(l.local, float))[None, :] for l in labs]
            out = to_local(np.asarray(fn(*zs), float).reshape(-1))
            return LocalPoint(prefix, tuple(float(v) for v in out))

        inner = TupleMap(resolver, rule, 2, None, "template")
        if order == 1:
            inner.fn = lambda a, b_, rule=rule: rule(a)
        return proj, inner

    maps, wit = [], {}
    for name, prefix in (("f", (1,)), ("g", (OMEGA,))):
        for i, (fn, order) in enumerate(template_maps):
            proj, inner = on_copy(prefix, fn, order)
            f = PrecomposedMap(inner, proj, 3 * lip_z, f"{name}'{i + 1}")
            maps.append(f)
            wit[f.name] = f
    maps.append(F)
    wit["F"] = F
    return maps, wit, g


def gifs_component_space(template_maps=None, b: GoodSequence | None = None, depth: int = 3,
                         width: int = 5, template: TemplateCloud | None = None,
                         origin: float = 0.0) -> Bundle:
    """Order-2 system whose attractor has a template copy at every leaf.

    ``template_maps`` is a list of (function, order) pairs acting on template
    coordinates with Lipschitz constant at most 1/3.
    """
    from .scales import geometric_good
    template = segment_grid(17) if template is None else template
    template_maps = default_segment_ifs() if template_maps is None else template_maps
    b = geometric_good(Fraction(1, 30), Fraction(1, 30)) if b is None else b
    lip_z = float(lip_of_template_maps(template_maps, template))
    if lip_z > 1 / 3 + 1e-12:
        raise ValueError(f"template system has Lipschitz constant {lip_z} > 1/3")
    tree = LambdaAlpha(OrdinalIndex(None))
    space = realize_z_space(tree, b, template, depth, width, origin)
    resolver = Resolver(space)
    lam = b.lam_float
    maps, wit, g = _component_maps(space, resolver, template_maps, lam, lip_z)
    recipe = {"recipe": "component-space", "b": b.to_json(), "depth": depth,
              "width": width, "template": template.to_json(), "template_lip": lip_z}
    bundle = Bundle(space, Gifs(maps), wit, recipe, lam)
    bundle.g = g
    bundle.claimed = max(3 * lip_z, lam / 2)
    bundle.attractor_check = lambda: component_attractor_check(bundle)
    return bundle


def template_link_gap(template: TemplateCloud) -> float:
    """Smallest threshold that chains the template cloud into one piece."""
    from scipy.sparse.csgraph import minimum_spanning_tree
    pts = template.points
    d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    mst = minimum_spanning_tree(d).toarray()
    return float(mst.max()) / template.diam


def copy_gaps(space: SpaceApprox, slack: float = 1e-6) -> np.ndarray:
    """Per-point linkage threshold: copy scale times the template link gap."""
    from .realization import copy_span
    base = template_link_gap(space.template) * (1 + slack)
    gaps = np.zeros(len(space))
    cache = {}
    for i, lab in enumerate(space.labels):
        if lab.index < 0:
            continue
        p = lab.leaf.prefix
        if p not in cache:
            cache[p] = copy_span(space.b, p) * base
        gaps[i] = cache[p]
    return gaps


def component_attractor_check(bundle: Bundle) -> dict:
    space = bundle.space
    img = hutchinson_step(bundle.gifs, space)
    residual = hausdorff(img, space)
    snapped = set()
    trunc = space.truncation
    for lab in img.labels:
        if isinstance(lab, CopyPoint):
            snapped.add(trunc.snap(lab.leaf.prefix, lab.leaf.is_open))
        else:
            snapped.add(trunc.snap(lab.prefix, False))
    address_exact = snapped == set(trunc.boundary)
    ok = residual <= 2 * space.error_bound and address_exact
    return {"exact": ok, "residual": residual, "bound": 2 * space.error_bound,
            "address_layer_exact": address_exact, "size": len(space)}


def component_quotient_check(bundle: Bundle) -> dict:
    space = bundle.space
    cloud = as_pointset(space)
    reps, assign = component_quotient(cloud, copy_gaps(space))
    q = quotient_gifs(bundle.gifs, assign, cloud)
    comp_leaves = {}
    for i, c in enumerate(assign.labels.tolist()):
        comp_leaves.setdefault(c, set()).add(space.labels[i].leaf)
    one_leaf = all(len(v) == 1 for v in comp_leaves.values())
    leaves = sorted((next(iter(v)) for v in comp_leaves.values()), key=lambda l: l.sort_key())
    s_space = realize_s_space(space.tree, space.b, space.depth, space.width)
    matches = one_leaf and set(leaves) == set(s_space.labels) and \
        len(leaves) == len(s_space.labels)
    return {"components": assign.count, "well_defined": q.ok,
            "quotient_attractor_exact": q.attractor_ok, "one_leaf_per_component": one_leaf,
            "matches_s_space": matches, "violations": q.violations[:5]}


# ------------------------------------------------------------ densify

def densify(K, eps: float, template_bundle: Bundle) -> tuple:
    """Small separated copies of the template attractor at every point of K."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    K = np.asarray(K, dtype=float)
    if K.ndim == 1:
        K = K[:, None]
    if len(K) == 0:
        raise ValueError("K is empty")
    host = template_bundle.space
    coords = host.coords
    if K.shape[1] < coords.shape[1]:
        raise ValueError("K has lower dimension than the template")
    pad = np.zeros((len(coords), K.shape[1]))
    pad[:, : coords.shape[1]] = coords - coords.min(axis=0)
    diam = float(np.max(np.linalg.norm(pad[:, None, :] - pad[None, :, :], axis=-1)))
    if len(K) > 1:
        d = np.linalg.norm(K[:, None, :] - K[None, :, :], axis=-1)
        minsep = float(d[np.triu_indices(len(K), 1)].min())
        if minsep == 0:
            raise ValueError("K has repeated points")
    else:
        minsep = np.inf
    size = min(0.49 * eps, minsep / 3)
    scale = size / diam
    parts = []
    for x in K:
        pts = PointSet(x + scale * pad, host.labels)
        parts.append((pts, template_bundle.gifs))
    G, union = combine_separated(parts)
    return union, G

"""Command line entry point: ``gifs-lab <command> ...``.

Exit codes: 0 when everything checked passes, 1 when a verification fails,
2 for usage errors and unreadable inputs.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from . import constructions as C
from .gifs_engine import (
    PointSet,
    as_pointset,
    hausdorff,
    iterate_to_attractor,
    lipschitz_estimate,
)
from .realization import (
    SpaceApprox,
    realize_bp_space,
    realize_s_space,
    realize_z_space,
    segment_grid,
    verify_space_conditions,
)
from .scales import GoodSequence, PMode, PSequence, geometric_good, pair_b_for_p
from .symbolic import (
    OMEGA,
    BoundaryAddress,
    Exactness,
    LambdaAlpha,
    LambdaAlphaN,
    LambdaMax,
    LambdaR,
    LambdaS,
    OrdinalIndex,
    cb_height_symbolic,
    cb_rank_bruteforce,
    enumerate_boundary,
    format_address,
    tree_from_json,
)


class UsageError(Exception):
    pass


# ---------------------------------------------------------- argument parsing

def parse_alpha(text: str) -> OrdinalIndex:
    if text in ("w", "omega"):
        return OrdinalIndex(None)
    try:
        return OrdinalIndex(int(text))
    except ValueError:
        raise UsageError(f"bad ordinal {text!r}; use an integer or w")


def parse_p(text: str) -> PSequence:
    """power:<p1>:m=<m> | powern:<p1> | const:<p>."""
    parts = text.split(":")
    try:
        if parts[0] == "power":
            m = 2
            for extra in parts[2:]:
                key, val = extra.split("=")
                if key != "m":
                    raise ValueError
                m = int(val)
            return PSequence(int(parts[1]), PMode.POWER_M, m)
        if parts[0] == "powern":
            return PSequence(int(parts[1]), PMode.POWER_N)
        if parts[0] == "const":
            return PSequence(int(parts[1]), PMode.CONSTANT)
    except (IndexError, ValueError):
        pass
    raise UsageError(f"bad p sequence {text!r}")


def parse_b(text: str, width: int = 6):
    """geom:<c>/<q-denominator> or geom:<c>,<q>; pair:<p-sequence> gives (b, pair)."""
    try:
        kind, rest = text.split(":", 1)
        if kind == "geom":
            if "," in rest:
                c, q = rest.split(",")
                return geometric_good(Fraction(c), Fraction(q)), None
            c, den = rest.split("/")
            return geometric_good(Fraction(c), Fraction(1, int(den))), None
        if kind == "pair":
            pair = pair_b_for_p(parse_p(rest), max(width, 2))
            return pair.b, pair
    except UsageError:
        raise
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"bad scale sequence {text!r}: {exc}")
    raise UsageError(f"bad scale sequence {text!r}")


def make_tree(name: str, alpha=None, n: int = 1):
    if name == "max":
        return LambdaMax()
    if name == "s":
        return LambdaS()
    if name == "r":
        return LambdaR()
    if name == "alpha":
        return LambdaAlpha(alpha) if n == 1 else LambdaAlphaN(alpha, n)
    raise UsageError(f"unknown tree {name!r}")


@dataclass
class RecipeConfig:
    """Parameters of one build, stored next to its outputs."""

    recipe: str
    params: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "RecipeConfig":
        data = json.loads(text)
        return RecipeConfig(data["recipe"], data.get("params", {}))


# ------------------------------------------------------------- bundles

def build_bundle(cfg: RecipeConfig):
    p = cfg.params
    depth, width = int(p.get("depth", 4)), int(p.get("width", 6))
    if cfg.recipe == "scattered":
        b, _ = parse_b(p.get("b", "geom:1/30,1/30"), width)
        return C.gifs_scattered(parse_alpha(str(p.get("alpha", "1"))), int(p.get("n", 1)),
                                b, depth, width)
    if cfg.recipe == "sandwiched":
        b, _ = parse_b(p.get("b", "geom:1/30,1/30"), width)
        return C.gifs_sandwiched(make_tree(p.get("tree", "r")), b, depth, width)
    if cfg.recipe == "mixed":
        pair = pair_b_for_p(parse_p(p.get("p", "power:2:m=2")), width)
        m = int(p.get("m", 2))
        base = C.gifs_scattered(parse_alpha(str(p.get("alpha", "1"))), int(p.get("n", 1)),
                                pair.b, depth, width)
        return C.gifs_mixed(base, pair, m, depth, width)
    if cfg.recipe == "component-space":
        b, _ = parse_b(p.get("b", "geom:1/30,1/30"), width)
        grid = int(p.get("grid", 17))
        copies = int(p.get("copies", 4))
        return C.gifs_component_space(C.default_segment_ifs(copies), b, depth, width,
                                      segment_grid(grid))
    if cfg.recipe == "densify":
        base = build_bundle(RecipeConfig("scattered", {k: v for k, v in p.items()
                                                       if k not in ("points", "eps")}))
        K = [[float(v) for v in str(pt).split(",")] for pt in p.get("points", ["0", "10"])]
        union, G = C.densify(np.asarray(K), float(p.get("eps", 1.0)), base)
        return DensifyResult(union, G, cfg, np.asarray(K))
    raise UsageError(f"unknown recipe {cfg.recipe!r}")


@dataclass
class DensifyResult:
    cloud: PointSet
    gifs: object
    cfg: RecipeConfig
    K: np.ndarray

    def report(self) -> dict:
        from .gifs_engine import hutchinson_step
        img = hutchinson_step(self.gifs, self.cloud)
        return {"recipe": self.cfg.recipe, "points": len(self.cloud),
                "hausdorff_to_K": hausdorff(PointSet(self.K), self.cloud),
                "attractor": {"exact": set(img.labels) == set(self.cloud.labels)}}


def load_bundle(directory: str):
    path = os.path.join(directory, "recipe.json")
    if not os.path.isfile(path):
        raise UsageError(f"{directory} is not a build directory")
    with open(path) as fh:
        return build_bundle(RecipeConfig.from_json(fh.read()))


def _dump(obj, path=None):
    text = json.dumps(obj, indent=1, sort_keys=True, default=str)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


# ------------------------------------------------------------- commands

def cmd_space_build(args):
    b, pair = parse_b(args.b, args.width)
    tree = make_tree(args.tree, parse_alpha(args.alpha), args.n)
    if args.kind == "s":
        space = realize_s_space(tree, b, args.depth, args.width)
    elif args.kind == "bp":
        if pair is None:
            pair = pair_b_for_p(parse_p(args.p), args.width)
        space = realize_bp_space(tree, pair, args.depth, args.width)
    else:
        space = realize_z_space(tree, b, segment_grid(args.grid), args.depth, args.width)
    space.save(args.output)
    print(f"{len(space)} points, error bound {space.error_bound!r} -> {args.output}")
    return 0


def _load_space(path) -> SpaceApprox:
    if not os.path.isfile(path):
        raise UsageError(f"no such file: {path}")
    try:
        return SpaceApprox.load(path)
    except (ValueError, KeyError) as exc:
        raise UsageError(f"unreadable space file {path}: {exc}")


def cmd_space_verify(args):
    space = _load_space(args.space)
    rep = verify_space_conditions(space, args.tol)
    _dump({"ok": rep.ok, "summary": rep.summary(),
           "failures": [(c.name, format_address(c.node) if isinstance(c.node, tuple) else c.node,
                         c.lhs, c.rhs) for c in rep.failures[:20]]})
    return 0 if rep.ok else 1


def cmd_gifs_build(args):
    params = {"depth": args.depth, "width": args.width, "b": args.b, "alpha": args.alpha,
              "n": args.n}
    if args.recipe == "sandwiched":
        params["tree"] = args.tree
    if args.recipe == "mixed":
        params.update(p=args.p, m=args.m)
    if args.recipe == "component-space":
        params.update(grid=args.grid, copies=args.copies)
    if args.recipe == "densify":
        params.update(points=args.points, eps=args.eps)
    cfg = RecipeConfig(args.recipe, params)
    result = build_bundle(cfg)
    os.makedirs(args.output, exist_ok=True)
    with open(os.path.join(args.output, "recipe.json"), "w") as fh:
        fh.write(cfg.to_json() + "\n")
    if isinstance(result, DensifyResult):
        rep = result.report()
        _dump(rep, os.path.join(args.output, "report.json"))
    else:
        rep = result.save(args.output, measure=not args.no_lip, seed=args.seed)
    ok = rep["attractor"]["exact"]
    print(f"built {args.recipe} in {args.output}: attractor equation "
          f"{'holds' if ok else 'FAILS'}")
    return 0 if ok else 1


def cmd_verify_attractor(args):
    bundle = load_bundle(args.dir)
    rep = bundle.report() if isinstance(bundle, DensifyResult) else bundle.attractor_check()
    if isinstance(bundle, DensifyResult):
        rep = rep["attractor"]
    _dump(rep)
    return 0 if rep["exact"] else 1


def cmd_check_lip(args):
    bundle = load_bundle(args.dir)
    if isinstance(bundle, DensifyResult):
        out = {f.name: lipschitz_estimate(f, bundle.cloud, seed=args.seed).value
               for f in bundle.gifs.maps}
        _dump(out)
        return 0
    lip = bundle.lipschitz(seed=args.seed)
    _dump(lip)
    ok = all(v["claimed"] is None or v["measured"] <= v["claimed"] + 1e-12 for v in lip.values())
    return 0 if ok else 1


def cmd_iterate(args):
    bundle = load_bundle(args.dir)
    if isinstance(bundle, DensifyResult):
        raise UsageError("iterate needs a single-space build")
    space = bundle.space
    omega = BoundaryAddress((OMEGA,), Exactness.EXACT)
    host = as_pointset(space)
    if space.has(omega):
        seed = host.take([space.index_of(omega)])
    else:
        seed = host.take([0])
    res = iterate_to_attractor(bundle.gifs, seed, args.tol, args.max_iter, args.delta)
    if args.history:
        with open(args.history, "w") as fh:
            fh.write(res.history_csv())
    h = hausdorff(res.points, host)
    cert = res.certificate
    bound = (cert if cert is not None else 0.0) + space.error_bound
    _dump({"iterations": len(res.history), "converged": res.converged,
           "final_size": len(res.points), "hausdorff_to_space": h, "certificate": cert,
           "bound": bound})
    return 0 if res.converged and h <= bound else 1


def rank_check(alpha: OrdinalIndex, n: int, depth: int | None = None, width: int = 4) -> dict:
    """Brute-force ranks on a marker-free truncation against the symbolic height."""
    if alpha.k is None:
        raise UsageError("rank needs a finite ordinal")
    tree = make_tree("alpha", alpha, n)
    depth = alpha.k + 2 if depth is None else depth
    boundary = enumerate_boundary(tree, depth, width)
    if any(not b.exact for b in boundary):
        raise UsageError(f"depth {depth} leaves truncated points; use at least {alpha.k + 2}")
    ranks = cb_rank_bruteforce(boundary, tree)
    top = max(ranks.values())
    count = sum(1 for r in ranks.values() if r == top)
    want_alpha, want_n = cb_height_symbolic(tree)
    ok = top == want_alpha.k and count == want_n
    return {"height": top, "top_count": count, "expected": [want_alpha.k, want_n],
            "points": len(boundary), "ok": ok}


def cmd_rank(args):
    rep = rank_check(parse_alpha(args.alpha), args.n, args.depth, args.width)
    _dump(rep)
    return 0 if rep["ok"] else 1


def cmd_quotient(args):
    bundle = load_bundle(args.dir)
    if getattr(bundle, "space", None) is None or bundle.space.kind != "z":
        raise UsageError("quotient needs a component-space build")
    rep = C.component_quotient_check(bundle)
    _dump(rep)
    return 0 if rep["quotient_attractor_exact"] and rep["matches_s_space"] else 1


def cmd_bound_profile(args):
    vals = C.nonattractor_bound(parse_p(args.p), args.order, args.n)
    for i, v in enumerate(vals, 1):
        print(f"c_{i} = {v} ~ {float(v):.6g}")
    return 0


def _svg(space: SpaceApprox) -> str:
    X = space.coords
    width, row_h = 800, 60
    if space.dim >= 2:
        lo, hi = X[:, :2].min(axis=0), X[:, :2].max(axis=0)
        span = np.where(hi - lo > 0, hi - lo, 1.0)
        pts = (X[:, :2] - lo) / span * (width - 40) + 20
        body = "".join(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="1.5"/>' for x, y in pts)
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{width}">'
                f"{body}</svg>\n")
    x = X[:, 0]
    center, span = float(x.min()), float(x.max() - x.min()) or 1.0
    rows = []
    for r in range(5):
        w = span * 10.0 ** (-2 * r)
        sel = x[(x >= center) & (x <= center + w)]
        y = 30 + r * row_h
        dots = "".join(f'<circle cx="{20 + (v - center) / w * (width - 40):.3f}" cy="{y}" r="1.5"/>'
                       for v in sel)
        rows.append(f'<line x1="20" y1="{y}" x2="{width - 20}" y2="{y}" stroke="#bbb"/>'
                    f'<text x="2" y="{y - 8}" font-size="10">zoom 1e-{2 * r}</text>{dots}')
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{5 * row_h + 20}">{"".join(rows)}</svg>\n')


def cmd_export(args):
    space = _load_space(args.space)
    if args.format == "json":
        text = json.dumps(space.to_json(), indent=1)
    elif args.format == "csv":
        text = space.to_csv()
    else:
        text = _svg(space)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


# --------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gifs-lab")
    sub = ap.add_subparsers(dest="command", required=True)

    def shape(p, depth=4, width=6):
        p.add_argument("--depth", type=int, default=depth)
        p.add_argument("--width", type=int, default=width)
        p.add_argument("--b", default="geom:1/30,1/30")

    sp = sub.add_parser("space").add_subparsers(dest="action", required=True)
    b = sp.add_parser("build")
    b.add_argument("--tree", default="max", choices=["max", "s", "r", "alpha"])
    b.add_argument("--alpha", default="1")
    b.add_argument("--n", type=int, default=1)
    b.add_argument("--kind", default="s", choices=["s", "bp", "z"])
    b.add_argument("--p", default="power:2:m=2")
    b.add_argument("--grid", type=int, default=17)
    b.add_argument("-o", "--output", required=True)
    shape(b)
    b.set_defaults(func=cmd_space_build)
    v = sp.add_parser("verify")
    v.add_argument("space")
    v.add_argument("--tol", type=float, default=1e-9)
    v.set_defaults(func=cmd_space_verify)

    gp = sub.add_parser("gifs").add_subparsers(dest="action", required=True)
    g = gp.add_parser("build")
    g.add_argument("recipe", choices=["scattered", "sandwiched", "mixed", "component-space",
                                      "densify"])
    g.add_argument("--alpha", default="1")
    g.add_argument("--n", type=int, default=1)
    g.add_argument("--tree", default="r")
    g.add_argument("--p", default="power:2:m=2")
    g.add_argument("--m", type=int, default=2)
    g.add_argument("--grid", type=int, default=17)
    g.add_argument("--copies", type=int, default=4)
    g.add_argument("--points", nargs="+", default=["0", "10"])
    g.add_argument("--eps", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--no-lip", action="store_true")
    g.add_argument("-o", "--output", required=True)
    shape(g)
    g.set_defaults(func=cmd_gifs_build)
    it = gp.add_parser("iterate")
    it.add_argument("dir")
    it.add_argument("--tol", type=float, default=1e-6)
    it.add_argument("--delta", type=float, default=0.0)
    it.add_argument("--max-iter", type=int, default=100)
    it.add_argument("--history")
    it.set_defaults(func=cmd_iterate)
    cl = gp.add_parser("check-lip")
    cl.add_argument("dir")
    cl.add_argument("--seed", type=int, default=0)
    cl.set_defaults(func=cmd_check_lip)
    va = gp.add_parser("verify-attractor")
    va.add_argument("dir")
    va.set_defaults(func=cmd_verify_attractor)

    r = sub.add_parser("rank")
    r.add_argument("--alpha", default="1")
    r.add_argument("--n", type=int, default=1)
    r.add_argument("--depth", type=int)
    r.add_argument("--width", type=int, default=4)
    r.set_defaults(func=cmd_rank)

    q = sub.add_parser("quotient")
    q.add_argument("dir")
    q.set_defaults(func=cmd_quotient)

    bp = sub.add_parser("bound-profile")
    bp.add_argument("--p", default="power:2:m=2")
    bp.add_argument("--order", type=int, default=1)
    bp.add_argument("--n", type=int, default=6)
    bp.set_defaults(func=cmd_bound_profile)

    ex = sub.add_parser("export")
    ex.add_argument("format", choices=["json", "csv", "svg"])
    ex.add_argument("space")
    ex.add_argument("-o", "--output")
    ex.set_defaults(func=cmd_export)
    return ap


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

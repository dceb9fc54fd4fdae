"""Addresses, trees, boundaries, ladders and Cantor-Bendixson ranks.

Everything here is combinatorial. An address is a plain tuple whose entries
are positive ints or the ``OMEGA`` sentinel, which may only sit in the last
position. Trees are immutable, hashable descriptions that answer membership
questions; finite views of them come from ``enumerate_boundary``.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence


class _Omega:
    """The symbol omega: larger than every integer, absorbing under +/-."""

    __slots__ = ()
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "OMEGA"

    def __reduce__(self):
        return (_Omega, ())

    def __lt__(self, other):
        if other is self or isinstance(other, int):
            return False
        return NotImplemented

    def __le__(self, other):
        if other is self:
            return True
        if isinstance(other, int):
            return False
        return NotImplemented

    def __gt__(self, other):
        if other is self:
            return False
        if isinstance(other, int):
            return True
        return NotImplemented

    def __ge__(self, other):
        if other is self or isinstance(other, int):
            return True
        return NotImplemented

    def __add__(self, other):
        return self

    __radd__ = __add__

    def __sub__(self, other):
        if other is self:
            raise ArithmeticError("omega - omega is undefined")
        return self

    def __hash__(self):
        return hash("omega-entry")


OMEGA = _Omega()

Address = tuple


def is_omega(entry) -> bool:
    return entry is OMEGA


def check_address(eta: Iterable) -> tuple:
    """Validate and normalise an address, returning it as a tuple."""
    eta = tuple(eta)
    for pos, e in enumerate(eta):
        if e is OMEGA:
            if pos != len(eta) - 1:
                raise ValueError(f"omega may only be the last entry: {eta!r}")
        elif isinstance(e, bool) or not isinstance(e, int) or e < 1:
            raise ValueError(f"address entries must be ints >= 1 or OMEGA: {eta!r}")
    return eta


def ends_with_omega(eta: tuple) -> bool:
    return bool(eta) and eta[-1] is OMEGA


def concat(xi: Sequence, eta: Sequence) -> tuple:
    """Concatenate two addresses; the left one must not end in omega."""
    xi, eta = tuple(xi), tuple(eta)
    if ends_with_omega(xi):
        raise ValueError("cannot extend an address that ends with omega")
    return check_address(xi + eta)


def weight(eta: Sequence):
    """Sum of entries, OMEGA as soon as one entry is omega."""
    total = 0
    for e in eta:
        if e is OMEGA:
            return OMEGA
        total += e
    return total


def is_prefix(xi: Sequence, eta: Sequence) -> bool:
    xi, eta = tuple(xi), tuple(eta)
    return len(xi) <= len(eta) and eta[: len(xi)] == xi


def address_key(eta: tuple) -> tuple:
    """Sort key for addresses with omega after every integer."""
    return tuple((1, 0) if e is OMEGA else (0, e) for e in eta)


def entry_to_json(e):
    return "w" if e is OMEGA else e


def entry_from_json(v):
    if v in ("w", "omega", "OMEGA"):
        return OMEGA
    if isinstance(v, str):
        v = int(v)
    return v


def address_to_json(eta: tuple) -> list:
    return [entry_to_json(e) for e in eta]


def address_from_json(data) -> tuple:
    return check_address(entry_from_json(v) for v in data)


def address_to_path(eta: tuple) -> str:
    """Dotted path string, e.g. ``2.w``; the empty address is ``""``."""
    return ".".join(str(entry_to_json(e)) for e in eta)


def address_from_path(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    return address_from_json(text.split("."))


def format_address(eta: tuple) -> str:
    if not eta:
        return "()"
    return "(" + ",".join("w" if e is OMEGA else str(e) for e in eta) + ")"


# ----------------------------------------------------------------- ordinals

@functools.total_ordering
@dataclass(frozen=True)
class OrdinalIndex:
    """Either a finite ordinal ``Fin(k)`` or the first infinite one.

    ``k`` is None for omega.
    """

    k: int | None

    def __post_init__(self):
        if self.k is not None and (not isinstance(self.k, int) or self.k < 0):
            raise ValueError("finite ordinal must be a non-negative int")

    @property
    def is_omega(self) -> bool:
        return self.k is None

    def __lt__(self, other):
        if not isinstance(other, OrdinalIndex):
            return NotImplemented
        if self.k is None:
            return False
        return other.k is None or self.k < other.k

    def __repr__(self):
        return "Omega" if self.k is None else f"Fin({self.k})"

    def to_json(self):
        return "w" if self.k is None else self.k

    @staticmethod
    def from_json(v) -> "OrdinalIndex":
        if v in ("w", "omega", "Omega", "OMEGA"):
            return Omega
        return Fin(int(v))


def Fin(k: int) -> OrdinalIndex:
    return OrdinalIndex(k)


Omega = OrdinalIndex(None)


def ladder(alpha: OrdinalIndex, n: int) -> OrdinalIndex:
    """The n-th rung below alpha: Fin(min(n-1, k-1)) or Fin(n-1) for omega."""
    if n < 1:
        raise ValueError("ladder index starts at 1")
    if alpha.is_omega:
        return Fin(n - 1)
    if alpha.k == 0:
        raise ValueError("Fin(0) has no ladder")
    return Fin(min(n - 1, alpha.k - 1))


def ordinal_value(alpha: OrdinalIndex) -> int:
    if alpha.is_omega:
        raise ValueError("omega has no finite value")
    return alpha.k


# -------------------------------------------------------------------- trees

class NodeStatus(enum.Enum):
    INTERIOR = "InteriorNode"
    LEAF = "BoundaryLeaf"
    ABSENT = "NotInTree"


InteriorNode = NodeStatus.INTERIOR
BoundaryLeaf = NodeStatus.LEAF
NotInTree = NodeStatus.ABSENT


class TreeSpec:
    """Base class: a prefix-closed set of addresses given by a rule.

    Subclasses implement ``_contains``. Everything else is derived, but
    finite trees override the child queries to avoid probing.
    """

    kind = "abstract"
    # trees whose membership rule never produces a non-proper truncation
    proper_by_construction = True

    def contains(self, eta) -> bool:
        return _contains_cached(self, tuple(eta))

    def _contains(self, eta: tuple) -> bool:
        raise NotImplementedError

    def has_children(self, eta: tuple) -> bool:
        eta = tuple(eta)
        if ends_with_omega(eta):
            return False
        return any(self.contains(eta + (c,)) for c in (OMEGA, 1, 2))

    def status(self, eta) -> NodeStatus:
        eta = tuple(eta)
        if not self.contains(eta):
            return NodeStatus.ABSENT
        return NodeStatus.INTERIOR if self.has_children(eta) else NodeStatus.LEAF

    def width_at(self, eta: tuple, width: int) -> int:
        """Largest integer child kept below eta by a width-N cut."""
        return width

    def children(self, eta: tuple, width: int) -> list:
        """Children entries of eta kept by a width-N cut, omega first."""
        eta = tuple(eta)
        if ends_with_omega(eta):
            return []
        width = self.width_at(eta, width)
        out = [OMEGA] if self.contains(eta + (OMEGA,)) else []
        out.extend(k for k in range(1, width + 1) if self.contains(eta + (k,)))
        return out

    def has_child_beyond(self, eta: tuple, width: int) -> bool:
        eta = tuple(eta)
        width = self.width_at(eta, width)
        return not ends_with_omega(eta) and self.contains(eta + (width + 1,))

    def to_json(self) -> dict:
        return {"kind": self.kind}


@functools.lru_cache(maxsize=1 << 18)
def _contains_cached(tree: TreeSpec, eta: tuple) -> bool:
    return tree._contains(eta)


@dataclass(frozen=True)
class LambdaMax(TreeSpec):
    """All addresses."""

    kind = "LambdaMax"

    def _contains(self, eta):
        try:
            check_address(eta)
        except ValueError:
            return False
        return True


@dataclass(frozen=True)
class LambdaS(TreeSpec):
    """Addresses with no entry equal to 1."""

    kind = "LambdaS"
    proper_by_construction = False

    def _contains(self, eta):
        return LambdaMax()._contains(eta) and 1 not in eta


@dataclass(frozen=True)
class LambdaR(TreeSpec):
    """Addresses with at most one entry equal to 1."""

    kind = "LambdaR"
    proper_by_construction = False

    def _contains(self, eta):
        return LambdaMax()._contains(eta) and eta.count(1) <= 1


def _alpha_contains(alpha: OrdinalIndex, eta: tuple) -> bool:
    a = alpha
    for pos, e in enumerate(eta):
        if a.k == 0:
            return False
        if e is OMEGA:
            return pos == len(eta) - 1
        if not isinstance(e, int) or e < 1:
            return False
        a = ladder(a, e)
    return True


@dataclass(frozen=True)
class LambdaAlpha(TreeSpec):
    """The tree whose realizations are homeomorphic to omega^alpha + 1."""

    alpha: OrdinalIndex
    kind = "LambdaAlpha"

    def _contains(self, eta):
        return _alpha_contains(self.alpha, eta)

    def to_json(self):
        return {"kind": self.kind, "alpha": self.alpha.to_json()}


@dataclass(frozen=True)
class LambdaAlphaN(TreeSpec):
    """Tree for omega^alpha * n + 1.

    The first n-1 integer children carry full copies of LambdaAlpha, the
    rest climb the ladder. For alpha = 0 and n >= 2 the result is the
    finite tree {(), (w), (1), ..., (n-1)}: n isolated points.
    """

    alpha: OrdinalIndex
    n: int
    kind = "LambdaAlphaN"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")

    @property
    def proper_by_construction(self):
        return not (self.alpha.k == 0 and self.n >= 2)

    def _contains(self, eta):
        if not eta:
            return True
        if self.n == 1:
            return _alpha_contains(self.alpha, eta)
        head, rest = eta[0], eta[1:]
        if head is OMEGA:
            return not rest
        if not isinstance(head, int) or head < 1:
            return False
        if self.alpha.k == 0:
            return head <= self.n - 1 and not rest
        if head <= self.n - 1:
            return _alpha_contains(self.alpha, rest)
        return _alpha_contains(ladder(self.alpha, head - self.n + 1), rest)

    def width_at(self, eta, width):
        # the root holds n pieces; the last one starts at child n, so it
        # keeps n - 1 extra children to see width N in its own entries
        return width + self.n - 1 if not eta else width

    def has_child_beyond(self, eta, width):
        if self.alpha.k == 0 and self.n >= 2:
            return False
        return super().has_child_beyond(eta, width)

    def to_json(self):
        return {"kind": self.kind, "alpha": self.alpha.to_json(), "n": self.n}


@dataclass(frozen=True)
class SubtreeShift1(TreeSpec):
    """{beta : eta + beta in base}."""

    base: TreeSpec
    eta: tuple
    kind = "SubtreeShift1"

    def _contains(self, beta):
        return self.base.contains(self.eta + beta)

    def to_json(self):
        return {"kind": self.kind, "base": self.base.to_json(),
                "eta": address_to_json(self.eta)}


@dataclass(frozen=True)
class SubtreeShift2(TreeSpec):
    """{i + beta : eta + (i+k-1) + beta in base} together with () and (w)."""

    base: TreeSpec
    eta: tuple
    k: int
    kind = "SubtreeShift2"

    def _contains(self, beta):
        if not beta or beta == (OMEGA,):
            return True
        head = beta[0]
        if head is OMEGA:
            return False
        return self.base.contains(self.eta + (head + self.k - 1,) + beta[1:])

    def to_json(self):
        return {"kind": self.kind, "base": self.base.to_json(),
                "eta": address_to_json(self.eta), "k": self.k}


@dataclass(frozen=True)
class FromAddressSet(TreeSpec):
    """Prefix closure of a finite set of addresses."""

    addresses: frozenset
    nodes: frozenset = field(init=False, repr=False, compare=False)
    kind = "FromAddressSet"
    proper_by_construction = False

    def __post_init__(self):
        addrs = frozenset(check_address(a) for a in self.addresses)
        object.__setattr__(self, "addresses", addrs)
        closure = {()}
        for a in addrs:
            for i in range(len(a) + 1):
                closure.add(a[:i])
        object.__setattr__(self, "nodes", frozenset(closure))
        kids: dict = {}
        for a in closure:
            if a:
                kids.setdefault(a[:-1], set()).add(a[-1])
        object.__setattr__(self, "_kids", {k: frozenset(v) for k, v in kids.items()})

    def _contains(self, eta):
        return eta in self.nodes

    def has_children(self, eta):
        return tuple(eta) in self._kids

    def children(self, eta, width):
        kids = self._kids.get(tuple(eta), ())
        ints = sorted(k for k in kids if k is not OMEGA and k <= width)
        return ([OMEGA] if OMEGA in kids else []) + ints

    def has_child_beyond(self, eta, width):
        kids = self._kids.get(tuple(eta), ())
        return any(k is not OMEGA and k > width for k in kids)

    def to_json(self):
        addrs = sorted(self.addresses, key=address_key)
        return {"kind": self.kind, "addresses": [address_to_json(a) for a in addrs]}


@dataclass(frozen=True)
class PrefixedUnion(TreeSpec):
    """{()} together with (e) + T_e for each listed pair (e, T_e)."""

    parts: tuple
    kind = "PrefixedUnion"

    def __post_init__(self):
        object.__setattr__(self, "_lookup", {e: t for e, t in self.parts})

    def _contains(self, eta):
        if not eta:
            return True
        sub = self._lookup.get(eta[0])
        return sub is not None and sub.contains(eta[1:])

    def to_json(self):
        return {"kind": self.kind, "parts": [
            {"entry": entry_to_json(e), "tree": t.to_json()} for e, t in self.parts]}


def tree_from_json(data: dict) -> TreeSpec:
    kind = data["kind"]
    if kind == "LambdaMax":
        return LambdaMax()
    if kind == "LambdaS":
        return LambdaS()
    if kind == "LambdaR":
        return LambdaR()
    if kind == "LambdaAlpha":
        return LambdaAlpha(OrdinalIndex.from_json(data["alpha"]))
    if kind == "LambdaAlphaN":
        return LambdaAlphaN(OrdinalIndex.from_json(data["alpha"]), int(data["n"]))
    if kind == "SubtreeShift1":
        return SubtreeShift1(tree_from_json(data["base"]), address_from_json(data["eta"]))
    if kind == "SubtreeShift2":
        return SubtreeShift2(tree_from_json(data["base"]),
                             address_from_json(data["eta"]), int(data["k"]))
    if kind == "FromAddressSet":
        return FromAddressSet(frozenset(address_from_json(a) for a in data["addresses"]))
    if kind == "PrefixedUnion":
        return PrefixedUnion(tuple((entry_from_json(p["entry"]), tree_from_json(p["tree"]))
                                   for p in data["parts"]))
    raise ValueError(f"unknown tree kind {kind!r}")


def tree_contains(tree: TreeSpec, eta) -> bool:
    return tree.contains(tuple(eta))


def boundary_status(tree: TreeSpec, eta) -> NodeStatus:
    return tree.status(tuple(eta))


def _require_interior(tree: TreeSpec, eta: tuple):
    if tree.status(eta) is not NodeStatus.INTERIOR:
        raise ValueError(f"{format_address(eta)} is not an interior node")


def subtree_shift1(tree: TreeSpec, eta) -> TreeSpec:
    """The subtree hanging below the interior node eta."""
    eta = check_address(eta)
    _require_interior(tree, eta)
    if not eta:
        return tree
    if isinstance(tree, LambdaMax):
        return tree
    if isinstance(tree, LambdaS):
        return tree
    if isinstance(tree, LambdaR):
        return LambdaS() if 1 in eta else tree
    if isinstance(tree, LambdaAlpha):
        a = tree.alpha
        for e in eta:
            a = ladder(a, e)
        return LambdaAlpha(a)
    if isinstance(tree, LambdaAlphaN) and (tree.n == 1 or tree.alpha.k != 0):
        head = eta[0]
        a = tree.alpha if head <= tree.n - 1 else ladder(tree.alpha, head - tree.n + 1)
        for e in eta[1:]:
            a = ladder(a, e)
        return LambdaAlpha(a)
    return SubtreeShift1(tree, eta)


def subtree_shift2(tree: TreeSpec, eta, k: int) -> TreeSpec:
    """Children of eta from index k on, renumbered to start at 1."""
    eta = check_address(eta)
    _require_interior(tree, eta)
    if not tree.contains(eta + (k,)):
        raise ValueError("eta + k is not in the tree")
    if k == 1:
        return subtree_shift1(tree, eta)
    if isinstance(tree, LambdaMax):
        return tree
    return SubtreeShift2(tree, eta, k)


def tree_of_subset(addresses) -> FromAddressSet:
    addrs = frozenset(check_address(a) for a in addresses)
    if not addrs:
        raise ValueError("a tree needs at least one address")
    return FromAddressSet(addrs)


# ---------------------------------------------------------------- boundary

class Exactness(enum.Enum):
    EXACT = "Exact"
    TRUNCATED = "TruncatedPath"


Exact = Exactness.EXACT
TruncatedPath = Exactness.TRUNCATED


@dataclass(frozen=True)
class BoundaryAddress:
    """A boundary point of a truncated tree.

    Exact points are genuine leaves. Truncated ones are interior nodes that
    stand for everything deeper below them.
    """

    prefix: tuple
    exactness: Exactness = Exactness.EXACT

    @property
    def exact(self) -> bool:
        return self.exactness is Exactness.EXACT

    @property
    def is_open(self) -> bool:
        return self.exactness is Exactness.TRUNCATED

    def sort_key(self):
        return address_key(self.prefix), self.exactness is Exactness.TRUNCATED

    def __repr__(self):
        tag = "" if self.exact else "~"
        return f"{format_address(self.prefix)}{tag}"

    def to_json(self) -> dict:
        return {"addr": address_to_json(self.prefix), "exact": self.exact}

    @staticmethod
    def from_json(data) -> "BoundaryAddress":
        ex = Exactness.EXACT if data.get("exact", True) else Exactness.TRUNCATED
        return BoundaryAddress(address_from_json(data["addr"]), ex)


def iter_truncation(tree: TreeSpec, depth: int, width: int) -> Iterator[tuple]:
    """Depth-first walk of the (depth, width) truncation.

    Yields ``(node, role)`` with role in {"interior", "leaf", "marker"};
    omega children are visited before integer children.
    """
    if depth < 1 or width < 1:
        raise ValueError("depth and width must be >= 1")
    stack = [()]
    while stack:
        node = stack.pop()
        if not tree.has_children(node):
            yield node, "leaf"
        elif len(node) >= depth:
            yield node, "marker"
        else:
            yield node, "interior"
            kids = tree.children(node, width)
            stack.extend(node + (c,) for c in reversed(kids))


def enumerate_boundary(tree: TreeSpec, depth: int, width: int) -> list:
    out = []
    for node, role in iter_truncation(tree, depth, width):
        if role == "leaf":
            out.append(BoundaryAddress(node, Exactness.EXACT))
        elif role == "marker":
            out.append(BoundaryAddress(node, Exactness.TRUNCATED))
    return out


@dataclass
class ProperReport:
    ok: bool
    violations: list

    def __bool__(self):
        return self.ok


def check_proper(tree: TreeSpec, depth: int = 3, width: int = 4) -> ProperReport:
    """Check that omega-nodes are leaves and interior nodes have all children."""
    bad = []
    for node, role in iter_truncation(tree, depth, width):
        if ends_with_omega(node) and role != "leaf":
            bad.append((node, "pi", "node ending with omega has children"))
        if role in ("interior", "marker"):
            if not tree.contains(node + (OMEGA,)):
                bad.append((node, "pii", "child w missing"))
            for k in range(1, tree.width_at(node, width) + 1):
                if not tree.contains(node + (k,)):
                    bad.append((node, "pii", f"child {k} missing"))
    return ProperReport(not bad, bad)


def cb_height_symbolic(tree: TreeSpec) -> tuple:
    if isinstance(tree, LambdaAlphaN):
        return tree.alpha, tree.n
    if isinstance(tree, LambdaAlpha):
        return tree.alpha, 1
    raise ValueError(f"no symbolic height for tree kind {tree.kind}")


def cb_rank_bruteforce(boundary: Sequence, tree: TreeSpec | None = None) -> dict:
    """Cantor-Bendixson ranks on the finite subspace given by ``boundary``.

    The topology is generated by the clopen sets X_xi and X~_xi of the
    prefix-closed tree spanned by the boundary. Each stage removes every
    point that is alone in some basis set among the survivors.
    """
    pts = list(boundary)
    if any(not b.exact for b in pts):
        raise ValueError("truncated boundary points present; ranks would be unsound")
    if tree is not None:
        for b in pts:
            if tree.status(b.prefix) is not NodeStatus.LEAF:
                raise ValueError(f"{b!r} is not a leaf of the tree")
    if not pts:
        return {}
    index = {b.prefix: i for i, b in enumerate(pts)}
    # basis sets keyed by node: plain subtrees and tail unions
    below: dict = {}
    for b, i in index.items():
        for j in range(len(b) + 1):
            below.setdefault(b[:j], []).append(i)
    siblings: dict = {}
    basis = []
    for node, members in below.items():
        if not ends_with_omega(node):
            basis.append(members)
        if node:
            siblings.setdefault(node[:-1], []).append((node[-1], members))
    for parent, kids in siblings.items():
        for k, _ in kids:
            if k is not OMEGA:
                basis.append([i for e, mem in kids if e >= k for i in mem])
        # a finitely branching node leaves its omega piece open on its own
        ints = [k for k, _ in kids if k is not OMEGA]
        top = max(ints, default=0)
        if tree is not None and not tree.contains(parent + (top + 1,)):
            basis.extend(mem for k, mem in kids if k is OMEGA)
    import numpy as np

    alive = np.ones(len(pts), dtype=bool)
    rank = np.full(len(pts), -1)
    stage = 0
    arrays = [np.asarray(m) for m in basis]
    while alive.any():
        isolated = np.zeros(len(pts), dtype=bool)
        for m in arrays:
            live = m[alive[m]]
            if live.size == 1:
                isolated[live[0]] = True
        if not isolated.any():
            raise RuntimeError("perfect kernel reached; space is not scattered")
        rank[isolated] = stage
        alive &= ~isolated
        stage += 1
    return {pts[i]: int(rank[i]) for i in range(len(pts))}


# --------------------------------------------------------------- truncation

class Truncation:
    """A (depth, width) truncation with a projection of ideal points onto it.

    ``snap`` sends an ideal address (optionally open, i.e. continuing with
    unknown entries) to the truncated boundary point that stands for it:
    the nearest retained leaf, the depth marker above it, or the omega
    leaf of the node whose children were cut by width.
    """

    def __init__(self, tree: TreeSpec, depth: int, width: int):
        self.tree = tree
        self.depth = depth
        self.width = width
        self.boundary = enumerate_boundary(tree, depth, width)
        self.leaves = {b.prefix for b in self.boundary if b.exact}
        self.markers = {b.prefix for b in self.boundary if not b.exact}
        self.points = set(self.boundary)
        self._cache: dict = {}

    def snap(self, eta: tuple, is_open: bool = False) -> BoundaryAddress:
        key = (eta, is_open)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._cache[key] = self._snap(eta, is_open)
        return hit

    def _snap(self, eta, is_open):
        node = ()
        for j in range(len(eta) + 1):
            node = eta[:j]
            if node in self.leaves:
                return BoundaryAddress(node, Exactness.EXACT)
            if node in self.markers:
                return BoundaryAddress(node, Exactness.TRUNCATED)
            if j == len(eta):
                break
            nxt = eta[: j + 1]
            e = eta[j]
            too_wide = e is not OMEGA and e > self.tree.width_at(node, self.width)
            if too_wide or not self.tree.contains(nxt):
                return self._omega_leaf(node)
        # ran out of entries while still at a retained interior node
        return self._omega_leaf(node)

    def _omega_leaf(self, node):
        cand = node + (OMEGA,)
        if cand in self.leaves:
            return BoundaryAddress(cand, Exactness.EXACT)
        raise ValueError(f"no omega leaf below {format_address(node)}")

"""Good scale sequences b, cluster sizes p and good pairs (b, p).

Sequences are stored as ratio tables so that sup conditions are finite
maxima over exact fractions. Values b_k are produced on demand in double
precision.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

LIMIT_RATIO = Fraction(1, 25)


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        # floats like 1/30 are meant as the nearby simple fraction
        return Fraction(x).limit_denominator(10**12)
    return Fraction(x)


@dataclass(frozen=True)
class GoodSequence:
    """b_0 > b_1 > ... given by a start value and successive ratios.

    ``ratios[i]`` is b_{i+1}/b_i; past the table every ratio equals ``tail``.
    A geometric sequence is the case of an empty table.
    """

    b0: Fraction
    ratios: tuple
    tail: Fraction
    kind: str = "ratios"
    _values: list = field(default_factory=list, compare=False, repr=False, hash=False)
    _exact: list = field(default_factory=list, compare=False, repr=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "b0", _frac(self.b0))
        object.__setattr__(self, "ratios", tuple(_frac(q) for q in self.ratios))
        object.__setattr__(self, "tail", _frac(self.tail))
        if self.b0 <= 0:
            raise ValueError("b_0 must be positive")
        if any(q <= 0 for q in self.ratios) or self.tail <= 0:
            raise ValueError("ratios must be positive")

    # exact data -----------------------------------------------------------
    def ratio(self, k: int) -> Fraction:
        """b_k / b_{k-1} for k >= 1."""
        if k < 1:
            raise ValueError("ratios start at k = 1")
        return self.ratios[k - 1] if k <= len(self.ratios) else self.tail

    @property
    def M(self) -> Fraction:
        return max(self.ratios + (self.tail,))

    @property
    def lam(self) -> Fraction:
        return 25 * self.M

    @property
    def lam_float(self) -> float:
        return float(self.lam)

    # values ---------------------------------------------------------------
    def __call__(self, k) -> float:
        """b_k as a float; b_omega and anything past the float range is 0."""
        if not isinstance(k, int):
            return 0.0  # omega
        if k < 0:
            raise ValueError("negative index")
        vals = self._values
        if not vals:
            vals.append(float(self.b0))
        while len(vals) <= k:
            nxt = vals[-1] * float(self.ratio(len(vals)))
            vals.append(nxt)
            if nxt == 0.0:
                break
        return vals[k] if k < len(vals) else 0.0

    def exact(self, k: int) -> Fraction:
        vals = self._exact
        if not vals:
            vals.append(self.b0)
        while len(vals) <= k:
            vals.append(vals[-1] * self.ratio(len(vals)))
        return vals[k]

    def to_json(self) -> dict:
        if self.kind == "geometric":
            return {"kind": "geometric", "c": str(self.b0), "q": str(self.tail)}
        return {"kind": "ratios", "b0": str(self.b0),
                "q": [str(q) for q in self.ratios], "tail": str(self.tail)}

    @staticmethod
    def from_json(data: dict) -> "GoodSequence":
        if data["kind"] == "geometric":
            return GoodSequence(_frac(data["c"]), (), _frac(data["q"]), "geometric")
        return GoodSequence(_frac(data["b0"]), tuple(_frac(q) for q in data["q"]),
                            _frac(data["tail"]))


def geometric_good(c, q, check: bool = True) -> GoodSequence:
    """b_k = c q^k; needs 0 < q < 1/25 unless ``check`` is off."""
    c, q = _frac(c), _frac(q)
    if check and not (0 < q < LIMIT_RATIO):
        raise ValueError(f"ratio {q} violates 0 < q < 1/25")
    if c <= 0:
        raise ValueError("c must be positive")
    return GoodSequence(c, (), q, "geometric")


def ratio_table(b0, ratios: Sequence, tail=None, check: bool = True) -> GoodSequence:
    ratios = tuple(_frac(q) for q in ratios)
    tail = ratios[-1] if tail is None else _frac(tail)
    b = GoodSequence(_frac(b0), ratios, tail)
    if check and not b.M < LIMIT_RATIO:
        raise ValueError(f"sup ratio {b.M} is not below 1/25")
    return b


@dataclass
class ScaleReport:
    ok: bool
    ratio_ok: bool
    derived_ok: bool
    failures: list

    def __bool__(self):
        return self.ok


def validate_good(b: GoodSequence, K: int = 50, rtol: float = 1e-12) -> ScaleReport:
    """Check sup ratio < 1/25 exactly and b_k <= lam/20 (b_{k-1}-2b_k-b_{k+1})."""
    if K < 2:
        raise ValueError("K must be >= 2")
    failures = []
    ratio_ok = b.M < LIMIT_RATIO
    if not ratio_ok:
        failures.append(("ratio", None, f"sup ratio {b.M} >= 1/25"))
    lam = float(b.lam)
    derived_ok = True
    for k in range(1, K + 1):
        lhs = b(k)
        rhs = lam / 20.0 * (b(k - 1) - 2 * b(k) - b(k + 1))
        if lhs > rhs * (1 + rtol):
            derived_ok = False
            failures.append(("derived", k, f"b_{k}={lhs!r} > {rhs!r}"))
    return ScaleReport(ratio_ok and derived_ok, ratio_ok, derived_ok, failures)


def shift(b: GoodSequence, i: int) -> GoodSequence:
    """The sequence k -> b_{i+k}."""
    if i < 0:
        raise ValueError("shift must be >= 0")
    if i == 0:
        return b
    if b.kind == "geometric":
        return GoodSequence(b.b0 * b.tail ** i, (), b.tail, "geometric")
    return GoodSequence(b.exact(i), b.ratios[i:], b.tail)


def scale_ratio(b: GoodSequence, i: int, horizon: int = 64) -> float:
    """sup_k b_{k+i}/b_k, exact over the table and its constant tail."""
    if i == 0:
        return 1.0
    best = Fraction(0)
    for k in range(0, max(len(b.ratios), 1) + 1):
        r = Fraction(1)
        for j in range(k + 1, k + i + 1):
            r *= b.ratio(j)
        best = max(best, r)
    return float(best)


# ---------------------------------------------------------------- p sequences

class PMode(enum.Enum):
    POWER_M = "PowerM"
    POWER_N = "PowerN"
    CONSTANT = "Constant"


PowerM = PMode.POWER_M
PowerN = PMode.POWER_N


@dataclass(frozen=True)
class PSequence:
    """Integer cluster sizes p_1, p_2, ... as exact big ints."""

    p1: int
    mode: PMode
    m: int = 1

    def __post_init__(self):
        if self.p1 < 2:
            raise ValueError("p_1 must be >= 2")
        if self.m < 1:
            raise ValueError("m must be >= 1")

    def __call__(self, k: int) -> int:
        if k < 1:
            raise ValueError("p is indexed from 1")
        p = self.p1
        for n in range(1, k):
            if self.mode is PMode.POWER_M:
                p = p ** self.m
            elif self.mode is PMode.POWER_N:
                p = p ** n
        return p

    def terms(self, count: int) -> list:
        return [self(k) for k in range(1, count + 1)]

    def to_json(self) -> dict:
        return {"p1": self.p1, "mode": self.mode.value, "m": self.m}

    @staticmethod
    def from_json(data) -> "PSequence":
        return PSequence(int(data["p1"]), PMode(data["mode"]), int(data.get("m", 1)))


def p_for_order(m: int, p1: int, mode: PMode = PMode.POWER_M) -> PSequence:
    return PSequence(p1, mode, m)


def constant_p(p: int) -> PSequence:
    return PSequence(p, PMode.CONSTANT)


@dataclass(frozen=True)
class GoodPair:
    b: GoodSequence
    p: PSequence
    K: int

    @property
    def lam(self) -> Fraction:
        return self.b.lam

    def check(self) -> list:
        """Exact check of the pair inequalities for k = 1..K; returns failures."""
        bad = []
        lam = self.b.lam
        for k in range(1, self.K + 1):
            q, pk = self.b.ratio(k), self.p(k)
            if not 8 * (1 + 4 * pk) * q < 1:
                bad.append((k, "8(1+4p_k)q_k < 1"))
            if k >= 2 and not q * pk <= lam:
                bad.append((k, "q_k p_k <= lambda_b"))
        return bad

    def to_json(self) -> dict:
        return {"b": self.b.to_json(), "p": self.p.to_json(), "K": self.K}

    @staticmethod
    def from_json(data) -> "GoodPair":
        return GoodPair(GoodSequence.from_json(data["b"]), PSequence.from_json(data["p"]),
                        int(data["K"]))


def pair_b_for_p(p: PSequence, K: int, b0=1) -> GoodPair:
    """Build ratios q_k making (b, p) a good pair on k = 1..K.

    The tail beyond K repeats q_K; the pair inequalities are only
    guaranteed up to K, so realizations must not use clusters past K.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    cap = Fraction(1, 26)
    q1 = min(cap, Fraction(1, 16 * (1 + 4 * p(1))))
    lam = 25 * q1
    qs = [q1]
    for k in range(2, K + 1):
        pk = p(k)
        qs.append(min(cap, Fraction(1, 16 * (1 + 4 * pk)), lam / pk))
    b = GoodSequence(_frac(b0), tuple(qs), qs[-1])
    pair = GoodPair(b, p, K)
    bad = pair.check()
    if bad or not validate_good(b, max(K, 2)).ok:
        raise ArithmeticError(f"constructed pair fails its own check: {bad}")
    return pair

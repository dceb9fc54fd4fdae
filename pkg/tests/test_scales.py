from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from artifact.scales import (
    PMode,
    PSequence,
    geometric_good,
    pair_b_for_p,
    ratio_table,
    scale_ratio,
    shift,
    validate_good,
)


def test_geometric_lambda():
    b = geometric_good(Fraction(1, 30), Fraction(1, 30))
    assert b.M == Fraction(1, 30)
    assert b.lam == Fraction(5, 6)
    assert geometric_good(1, Fraction(1, 26)).lam == Fraction(25, 26)


def test_ratio_limit_is_strict():
    with pytest.raises(ValueError):
        geometric_good(1, Fraction(1, 25))
    loose = geometric_good(1, Fraction(1, 25), check=False)
    rep = validate_good(loose)
    assert not rep.ok and not rep.ratio_ok


def test_validate_good_cases():
    assert validate_good(geometric_good(1, Fraction(1, 30)), K=50).ok
    alt = ratio_table(1, [Fraction(1, 26), Fraction(1, 30)] * 10)
    assert alt.M == Fraction(1, 26)
    assert validate_good(alt).ok


def test_exact_values_match_floats():
    b = geometric_good(Fraction(1, 30), Fraction(1, 30))
    for k in range(12):
        assert b.exact(k) == Fraction(1, 30 ** (k + 1))
        assert b(k) == pytest.approx(float(b.exact(k)), rel=1e-15)


def test_shift():
    q = Fraction(1, 30)
    s = shift(geometric_good(1, q), 2)
    g = geometric_good(q * q, q)
    for k in range(8):
        assert s.exact(k) == g.exact(k)
    b = geometric_good(1, q)
    assert shift(b, 0) is b
    alt = ratio_table(1, [Fraction(1, 26), Fraction(1, 30)] * 10)
    assert shift(alt, 1).M <= alt.M


@given(st.integers(0, 20))
def test_scale_ratio_of_geometric_is_power(i):
    q = Fraction(1, 30)
    assert scale_ratio(geometric_good(1, q), i) == pytest.approx(float(q) ** i, rel=1e-12)


def test_p_sequences():
    assert PSequence(2, PMode.POWER_M, 2).terms(4) == [2, 4, 16, 256]
    assert PSequence(2, PMode.POWER_M, 3).terms(3) == [2, 8, 512]
    assert PSequence(2, PMode.POWER_N).terms(4) == [2, 2, 4, 64]
    with pytest.raises(ValueError):
        PSequence(1, PMode.CONSTANT)


@pytest.mark.parametrize("K", [2, 4, 6])
def test_pair_construction_is_good(K):
    pair = pair_b_for_p(PSequence(2, PMode.POWER_M, 2), K)
    assert pair.check() == []
    assert pair.b.M < Fraction(1, 25)

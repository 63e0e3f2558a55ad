import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from nilcircle.rationals import (
    RationalSet,
    RationalVector,
    denominator_range,
    divisors,
    jordan_totient,
    kappa,
    lcm_upto,
    mobius,
    ramanujan_sum,
)


def test_farey_examples():
    assert [r.as_fractions() for r in RationalSet.farey(1, 0, 2.0).enumerate()] == [(Fraction(0),)]
    got = [r.as_fractions()[0] for r in RationalSet.farey(1, 1, 2.0).enumerate()]
    assert got == [Fraction(1, 3), Fraction(1, 2), Fraction(2, 3)]
    fixed = {r.as_fractions() for r in RationalSet.fixed_denominator(2, 2).enumerate()}
    half = Fraction(1, 2)
    assert fixed == {(0, 0), (0, half), (half, 0), (half, half)}
    assert RationalSet.empty(3).enumerate() == []


def test_farey_membership_rule():
    tau = 1.5
    for s in range(0, 6):
        rs = RationalSet.farey(2, s, tau)
        for r in rs.enumerate():
            assert tau**s <= r.denominator < tau ** (s + 1)
            assert math.gcd(*r.numerators, r.denominator) == 1
        assert len(rs.enumerate()) == len(rs)
        assert len({r for r in rs.enumerate()}) == len(rs)


def test_denominator_range_brute():
    for tau in (1.2, 1.5, 2.0):
        for s in range(8):
            brute = [q for q in range(1, 400) if tau**s <= q < tau ** (s + 1)]
            assert list(denominator_range(s, tau)) == brute


def test_set_algebra():
    a = RationalSet.farey(1, 1)
    b = RationalSet.fixed_denominator(1, 6)
    assert set((a | b).enumerate()) == set(a.enumerate()) | set(b.enumerate())
    assert set((b - a).enumerate()) == set(b.enumerate()) - set(a.enumerate())
    assert set((a & b).enumerate()) == set(a.enumerate()) & set(b.enumerate())
    assert b.is_compatible(6) and not a.is_compatible(4)
    with pytest.raises(ValueError):
        a | RationalSet.farey(2, 1)


def test_number_theory_helpers():
    assert divisors(12) == (1, 2, 3, 4, 6, 12)
    assert [mobius(n) for n in range(1, 11)] == [1, -1, -1, 0, -1, 1, -1, 0, 0, 1]
    assert lcm_upto(6) == 60
    for q in range(1, 30):
        for m in (1, 2):
            brute = sum(1 for a in itertools.product(range(q), repeat=m) if math.gcd(*a, q) == 1)
            assert jordan_totient(q, m) == brute
    assert kappa(0, 4.0, 2.0) == pytest.approx(2 ** (4 / math.log(2)))


def test_ramanujan_sum_matches_direct_sum():
    for q in (1, 4, 6, 9, 10):
        for m in (1, 2):
            vs = np.array(list(itertools.product(range(-4, 5), repeat=m)))
            got = ramanujan_sum(q, vs, m)
            for v, g in zip(vs, got):
                ref = sum(np.exp(2j * np.pi * np.dot(v, a) / q)
                          for a in itertools.product(range(q), repeat=m) if math.gcd(*a, q) == 1)
                assert abs(ref - g) < 1e-9


def test_rational_vector_normalises():
    r = RationalVector((2, 4), 6)
    assert r.numerators == (1, 2) and r.denominator == 3
    assert RationalVector((-1,), 4).numerators == (3,)
    assert r.lift(9) == (3, 6)
    with pytest.raises(ValueError):
        r.lift(4)
    with pytest.raises(ValueError):
        RationalVector((1,), 0)

import cmath
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from nilcircle.cutoffs import chi
from nilcircle.expsums import (
    PhasePoint,
    QuadratureError,
    continuous_profile_J,
    decay_fit,
    gauss_sum_complete,
    gauss_sums_all,
    nil_gauss_sum,
    nil_gauss_sums_batch,
    nil_gauss_table,
    nil_weyl_sum,
    oscillatory_P,
    sharp_weights,
    smooth_weights,
    weyl_sum,
)
from nilcircle.rationals import RationalVector

from oracles import oracle_gauss_sum, oracle_nil_gauss, oracle_word


def reduced_vectors(q, size):
    for a in itertools.product(range(q), repeat=size):
        if math.gcd(*a, q) == 1:
            yield a


# --- classical sums ----------------------------------------------------------

def test_weyl_sum_examples():
    P = 10
    w = smooth_weights(P)
    n = np.arange(-20, 21)
    assert weyl_sum(w, P, [0.0, 0.0]) == pytest.approx(np.sum(chi(n / P)))
    # alternating sum over |n| <= P
    val = weyl_sum(lambda m: (np.abs(m) <= P).astype(float), P, [0.5])
    assert abs(val.imag) < 1e-12 and round(val.real) in (-1, 0, 1) and abs(val.real - round(val.real)) < 1e-12
    rng = np.random.default_rng(0)
    for _ in range(20):
        theta = rng.random(3)
        assert abs(weyl_sum(w, P, theta)) <= np.sum(np.abs(chi(n / P))) + 1e-9
    with pytest.raises(ValueError):
        weyl_sum(w, 0.5, [0.1])


def test_weyl_sum_rational_phase_is_exact():
    q = 97
    theta = RationalVector((5, 31), q)
    P = 1000.0
    exact = weyl_sum(sharp_weights(P), P, theta)
    n = np.arange(-2000, 2001)
    ref = sum(cmath.exp(-2j * math.pi * ((5 * m + 31 * m * m) % q) / q) for m in n.tolist())
    assert abs(exact - ref) < 1e-8


def test_gauss_sum_examples():
    assert abs(gauss_sum_complete((1, 0), 2)) < 1e-15
    s = gauss_sum_complete((0, 1), 3)
    assert s == pytest.approx(-1j / math.sqrt(3), abs=1e-12)
    assert gauss_sum_complete((0,), 1) == 1
    with pytest.raises(ValueError):
        gauss_sum_complete((1,), 0)


@pytest.mark.parametrize("q", [4, 6, 7, 9])
@pytest.mark.parametrize("d", [1, 2, 3])
def test_gauss_sums_all_matches_direct(q, d):
    A, vals, reduced = gauss_sums_all(q, d)
    for a, v, red in zip(A.tolist(), vals, reduced):
        assert abs(v - oracle_gauss_sum(a, q)) < 1e-12
        assert red == (math.gcd(*a, q) == 1)
        assert abs(v) <= 1 + 1e-12


@settings(max_examples=40, deadline=None)
@given(q=st.integers(2, 30), a=st.lists(st.integers(-100, 100), min_size=2, max_size=2))
def test_gauss_sum_periodic(q, a):
    shifted = [x + q * 7 for x in a]
    assert abs(gauss_sum_complete(a, q) - gauss_sum_complete(shifted, q)) < 1e-12


def test_prime_quadratic_law():
    for p in [3, 5, 7, 11, 13, 31, 97]:
        _, vals, reduced = gauss_sums_all(p, 2)
        assert np.max(np.abs(vals[reduced])) == pytest.approx(p**-0.5, abs=1e-9)


def test_decay_fit_examples():
    q = np.arange(2, 40)
    slope, _, rms = decay_fit(list(zip(q, q**-0.5)))
    assert slope == pytest.approx(-0.5, abs=1e-9) and rms < 1e-9
    assert decay_fit([(2, 3.0), (5, 3.0), (9, 3.0)])[0] == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        decay_fit([(1, 1), (2, 1)])
    with pytest.raises(ValueError):
        decay_fit([(2, 1), (2, 1), (2, 1)])


def test_minor_arc_trend():
    ratios = []
    for j in range(6, 13):
        P = 2.0**j
        q = 2
        while q < math.sqrt(P) or any(q % f == 0 for f in range(2, q)):
            q += 1
        assert P**0.25 <= q <= P**0.75
        ratios.append(abs(weyl_sum(smooth_weights(P), P, [1 / q, 1 / q])) / P)
    assert all(b < a for a, b in zip(ratios, ratios[1:]))


# --- nilpotent sums ----------------------------------------------------------

def brute_nil_weyl(P, r, theta, variant, d):
    R = math.floor(2 * P)
    win = range(-R, R + 1)
    w = lambda n: 1.0 if abs(n) <= 2 * P else 0.0
    total = 0j
    for x in itertools.product(win, repeat=r):
        for y in itertools.product(win, repeat=r):
            word = oracle_word(x, y, variant, d)
            wt = math.prod(w(a) for a in x) * math.prod(w(b) for b in y)
            total += wt * cmath.exp(-2j * math.pi * float(np.dot(word, theta)))
    return total


def test_nil_weyl_at_zero_phase():
    for r in (1, 2):
        val = nil_weyl_sum(1.0, r, np.zeros(3))
        assert val == pytest.approx(5.0 ** (2 * r))


def test_nil_weyl_r1_hand_enumeration():
    theta = np.array([0.13, 0.71, 0.29])
    assert nil_weyl_sum(1.0, 1, theta) == pytest.approx(brute_nil_weyl(1.0, 1, theta, "D", 2), abs=1e-10)
    assert nil_weyl_sum(1.0, 1, theta, variant="Dt") == pytest.approx(brute_nil_weyl(1.0, 1, theta, "Dt", 2),
                                                                      abs=1e-10)


def test_nil_weyl_dp_equals_brute():
    rng = np.random.default_rng(1)
    theta = PhasePoint(tuple(rng.random(3)))
    for variant in ("D", "Dt"):
        dp = nil_weyl_sum(1.5, 2, theta, variant, method="dp")
        br = nil_weyl_sum(1.5, 2, theta, variant, method="brute")
        assert abs(dp - br) < 1e-9


def test_nil_gauss_examples():
    assert nil_gauss_sum(RationalVector((0, 0, 0), 1)) == pytest.approx(1.0)
    assert nil_gauss_sum(RationalVector((0, 0, 1), 2)) == pytest.approx(0.5)
    assert nil_gauss_sum(RationalVector((0, 0, 1), 2), method="brute") == pytest.approx(0.5)


@pytest.mark.parametrize("q", [2, 3, 4])
@pytest.mark.parametrize("r", [1, 2])
def test_nil_gauss_dp_matches_independent_oracle(q, r):
    for variant, word in (("G", "D"), ("Gt", "Dt")):
        A = np.array(list(reduced_vectors(q, 3)))
        dp = nil_gauss_sums_batch(A, q, r, 2, variant)
        for a, v in zip(A.tolist()[::3], dp[::3]):
            assert abs(v - oracle_nil_gauss(a, q, r, 2, word)) < 1e-12


def test_nil_gauss_table_bounded_and_periodic():
    q = 6
    T = nil_gauss_table(q, 1, 2)
    assert np.all(np.abs(T) <= 1 + 1e-12)
    assert T[0, 0, 0] == pytest.approx(1.0)
    a = RationalVector((1, 2, 5), q)
    assert T[1, 2, 5] == pytest.approx(nil_gauss_sum(a))
    shifted = RationalVector((1 + q, 2 - 2 * q, 5 + 3 * q), q)
    assert nil_gauss_sum(shifted) == pytest.approx(T[1, 2, 5])


def test_nil_gauss_brute_size_guard():
    with pytest.raises(ValueError):
        nil_gauss_sum(RationalVector((1, 1, 1), 101), r=4, method="brute")


# --- continuous profiles -----------------------------------------------------

def test_profile_J_examples():
    J0 = continuous_profile_J([0.0, 0.0])
    assert J0.real == pytest.approx(3.0, abs=1e-7)
    assert 2 <= J0.real <= 4
    assert abs(continuous_profile_J([0.0, 0.0], iota=1)) < 1e-7
    assert abs(continuous_profile_J([10.0, 0.0])) < abs(J0) / 2


def test_oscillatory_P_examples():
    assert oscillatory_P(np.zeros(3)).real == pytest.approx(9.0, abs=1e-7)
    assert oscillatory_P(np.zeros(3), r=2).real == pytest.approx(81.0, abs=1e-6)
    assert abs(oscillatory_P(np.zeros(3), iota=1)) < 1e-7
    assert abs(oscillatory_P([50.0, 0.0, 0.0])) < 0.5 * 9.0
    with pytest.raises(ValueError):
        oscillatory_P(np.zeros(3), r=3)


def test_oscillatory_P_against_dblquad():
    zeta = np.array([0.7, -0.4, 0.25])

    def integrand(y, w, part):
        # D(w, y) for r = 1: (y - w, y^2 - w^2, w^3 - w^2 y)
        ph = zeta[0] * (y - w) + zeta[1] * (y * y - w * w) + zeta[2] * (w**3 - w * w * y)
        val = float(chi(w)) * float(chi(y))
        return val * (math.cos(2 * math.pi * ph) if part == 0 else -math.sin(2 * math.pi * ph))

    cuts = [-2, -1, 1, 2]
    cells = [(a, b, c, e) for a, b in zip(cuts, cuts[1:]) for c, e in zip(cuts, cuts[1:])]
    re = sum(integrate.dblquad(integrand, a, b, c, e, args=(0,), epsabs=1e-11)[0] for a, b, c, e in cells)
    im = sum(integrate.dblquad(integrand, a, b, c, e, args=(1,), epsabs=1e-11)[0] for a, b, c, e in cells)
    assert oscillatory_P(zeta) == pytest.approx(complex(re, im), abs=1e-7)


def test_oscillatory_P_reports_non_convergence():
    with pytest.raises(QuadratureError):
        oscillatory_P([400.0, 90.0, 60.0], r=2, max_nodes=20)

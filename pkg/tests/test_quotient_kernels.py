import itertools

import numpy as np
import pytest

from nilcircle.quotient_kernels import GaussKernel, WeightKernel, gauss_operator_kernel, weight_kernel_W
from nilcircle.rationals import RationalSet

from oracles import e, oracle_gauss_sum


def direct_counting(b, Q, d):
    b1, b2 = b[:d], b[d:]
    if any(c % Q for c in b2):
        return 0.0
    hits = sum(all((n ** (l + 1) - b1[l]) % Q == 0 for l in range(d)) for n in range(Q))
    return hits / Q


def direct_spectral(b, A, B, Q, d):
    b1, b2 = b[:d], b[d:]
    first = sum(oracle_gauss_sum(r.numerators, r.denominator) * e(sum(x * f for x, f in zip(b1, r.as_fractions())))
                for r in A.enumerate())
    second = sum(e(sum(x * f for x, f in zip(b2, r.as_fractions()))) for r in B.enumerate())
    return first * second / Q ** (len(b))


# --- Gauss kernel -----------------------------------------------------------

def test_gauss_kernel_examples():
    V = gauss_operator_kernel(None, None, 3, 2)
    assert V((1, 1, 0)) == pytest.approx(1 / 3, abs=1e-12)
    assert abs(V((1, 2, 0))) < 1e-12
    assert gauss_operator_kernel(None, None, 1, 2)((0, 0, 0)) == pytest.approx(1.0)


@pytest.mark.parametrize("d", [2, 3])
def test_closed_form_equals_counting(d):
    for Q in range(1, 13):
        spectral = gauss_operator_kernel(None, None, Q, d)
        counting = gauss_operator_kernel(None, None, Q, d, method="counting")
        assert spectral.max_abs_diff(counting) < 1e-10


@pytest.mark.parametrize("Q", [2, 3, 4, 6])
def test_counting_against_direct_enumeration(Q):
    V = gauss_operator_kernel(None, None, Q, 2, method="counting")
    for b, v in V.items():
        assert v == pytest.approx(direct_counting(b, Q, 2), abs=1e-15)


@pytest.mark.parametrize("A_dens,B_dens,Q", [((1, 2), (1,), 4), ((3,), (1, 3), 6), ((2, 4), (2,), 4), ((), (1,), 3)])
def test_partial_sets_against_direct_sum(A_dens, B_dens, Q):
    A = RationalSet(2, frozenset(A_dens), "A")
    B = RationalSet(1, frozenset(B_dens), "B")
    V = gauss_operator_kernel(A, B, Q, 2)
    for b in itertools.product(range(Q), repeat=3):
        assert abs(V(b) - direct_spectral(b, A, B, Q, 2)) < 1e-12


def test_gauss_kernel_rejections():
    with pytest.raises(ValueError):
        gauss_operator_kernel(RationalSet(2, frozenset({3}), "A"), None, 4, 2)
    with pytest.raises(ValueError):
        gauss_operator_kernel(RationalSet(2, frozenset({2}), "A"), None, 4, 2, method="counting")
    with pytest.raises(ValueError):
        gauss_operator_kernel(RationalSet(3, frozenset({1}), "A"), None, 4, 2)
    with pytest.raises(ValueError):
        gauss_operator_kernel(None, None, 0, 2)
    V = gauss_operator_kernel(None, None, 2, 2)
    with pytest.raises(ValueError):
        V((1, 0))
    assert V((3, 1, 2)) == V((1, 1, 0))
    with pytest.raises(ValueError):
        V.max_abs_diff(gauss_operator_kernel(None, None, 3, 2))
    assert isinstance(V, GaussKernel)


def test_full_kernel_is_a_probability_on_the_curve_residues():
    for Q in (5, 8, 12):
        V = gauss_operator_kernel(None, None, Q, 2)
        assert np.sum(V.values).real == pytest.approx(1.0)
        assert np.all(V.values.real >= -1e-12)


# --- weight kernel ----------------------------------------------------------

FAST = dict(k=3, w=0, Q=2, delta=0.8, delta_p=0.9)


def test_weight_kernel_positive_and_bounded():
    W = WeightKernel(**FAST)
    w0 = W([0, 0, 0])
    assert w0 > 0
    assert abs(w0) <= W.mass_bound() * (1 + 1e-6)
    assert weight_kernel_W(h=[0, 0, 0], **FAST) == pytest.approx(w0)


def test_weight_kernel_decays():
    W = WeightKernel(**FAST)
    w0 = W([0, 0, 0])
    # points where tau^-k o h has size about 2^(delta k), along each axis
    r = 2 ** (0.8 * 3)
    probes = [[42, 0, 0], [0, 2 * round(r * 64 / 2), 0], [0, 0, 2 * round(r * 512 / 2)]]
    for h in probes:
        assert abs(W(h)) < 1e-3 * w0


def test_weight_kernel_window_sums():
    W = WeightKernel(**FAST)
    mass = W.zero_frequency_mass()
    assert mass == pytest.approx(3.0)
    # Poisson summation: summing over H_Q recovers the integrand at 0, over Z^3 it picks up Q^3
    assert W.window_sum("H_Q") == pytest.approx(mass, rel=0.05)
    assert W.window_sum("Z") == pytest.approx(W.Q**3 * mass, rel=0.05)
    with pytest.raises(ValueError):
        W.window_sum("R")


def test_weight_kernel_vectorized_and_validation():
    W = WeightKernel(**FAST)
    rows = np.array([[0, 0, 0], [2, 4, 8], [-6, 0, 2]])
    vals = W(rows)
    assert vals.shape == (3,) and vals[0] == pytest.approx(W([0, 0, 0]))
    with pytest.raises(ValueError):
        W([1, 0, 0])
    with pytest.raises(ValueError):
        W([0, 0])
    with pytest.raises(ValueError):
        WeightKernel(k=2, w=0, Q=4, delta=0.4)
    with pytest.raises(ValueError):
        WeightKernel(k=3, w=-1, Q=2)

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nilcircle.variation import (
    IndexedSequence,
    rademacher_menshov_rhs,
    sup_norm,
    variation,
    variation_columns,
    variation_exhaustive,
    variation_profile,
    variation_tilde,
)

from oracles import oracle_variation


def test_variation_examples():
    assert variation([3.0] * 7, 2) == 0
    assert variation([0, 1, 0], 2) == pytest.approx(math.sqrt(2))
    assert variation([0, 1, 0], 1) == pytest.approx(2)
    # one jump of 3 beats any refinement: 3^2 = 9 > 1 + 1 + 1
    assert variation([0, 1, 2, 3], 2) == pytest.approx(3)
    assert variation([5.0], 1.5) == 0 and variation([], 2) == 0


def test_bad_exponents():
    with pytest.raises(ValueError):
        variation([0, 1], 0.5)
    with pytest.raises(ValueError):
        variation([0, 1], math.inf)
    with pytest.raises(ValueError):
        variation_columns(np.zeros((3, 2)), math.inf)
    assert sup_norm([0, -4, 2]) == 4


def test_sequence_validation():
    with pytest.raises(ValueError):
        IndexedSequence((0, 2, 1), (1, 2, 3))
    with pytest.raises(ValueError):
        IndexedSequence((0, 1), (1.0,))
    with pytest.raises(ValueError):
        IndexedSequence.of([0.0, math.nan])


@settings(max_examples=60, deadline=None)
@given(vals=st.lists(st.floats(-10, 10), min_size=0, max_size=12),
       rho=st.sampled_from([1.0, 1.5, 2.0, 3.0, 7.5]))
def test_dp_equals_exhaustive_enumeration(vals, rho):
    got = variation(vals, rho)
    assert got == pytest.approx(oracle_variation(vals, rho), rel=1e-12, abs=1e-12)
    if len(vals) <= 9:
        assert got == pytest.approx(variation_exhaustive(vals, rho), rel=1e-12, abs=1e-12)


def test_complex_values():
    rng = np.random.default_rng(0)
    z = (rng.standard_normal(10) + 1j * rng.standard_normal(10)).tolist()
    assert variation(z, 2.5) == pytest.approx(oracle_variation(z, 2.5), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_monotone_in_rho(seed):
    a = np.random.default_rng(seed).standard_normal(30).tolist()
    profile = variation_profile(a, [1, 1.5, 2, 3, 5, 10])
    assert all(b[1] <= a_[1] + 1e-12 for a_, b in zip(profile, profile[1:]))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), rho=st.sampled_from([1.0, 2.0, 4.0]))
def test_tilde_norm_properties(seed, rho):
    rng = np.random.default_rng(seed)
    a = IndexedSequence.of(rng.standard_normal(20).tolist())
    b = IndexedSequence.of(rng.standard_normal(20).tolist())
    # triangle inequality
    assert variation_tilde(a + b, rho) <= variation_tilde(a, rho) + variation_tilde(b, rho) + 1e-12
    # sandwich: sup |a_t| <= |a_t0| + V
    V = variation(a, rho)
    assert all(sup_norm(a) <= abs(v) + V + 1e-12 for v in a.values)
    # l^rho domination: every jump is at most twice the l^rho norm, the sup at most once
    norm = float(np.sum(np.abs(a.array()) ** rho)) ** (1 / rho)
    assert V <= 2 * norm + 1e-12
    assert variation_tilde(a, rho) <= 3 * norm + 1e-12
    # ordered partition sharing the cut point, constant 1
    cut = int(rng.integers(0, 20))
    left = IndexedSequence.of(a.values[: cut + 1], a.indices[: cut + 1])
    right = IndexedSequence.of(a.values[cut:], a.indices[cut:])
    assert variation_tilde(a, rho) <= variation_tilde(left, rho) + variation_tilde(right, rho) + 1e-12


def test_partition_needs_the_shared_point():
    # blocks (0, 1) and (-1, 0) without a common point: the crossing jump 1 -> -1 is lost
    whole = variation_tilde([0, 1, -1, 0], 1)
    assert whole == 5
    assert variation_tilde([0, 1], 1) + variation_tilde([-1, 0], 1) == 4
    assert variation_tilde([0, 1, -1], 1) + variation_tilde([-1, 0], 1) == 6


def test_spike_needs_constant_three_for_tilde():
    spike = [0.0, 1.0, 0.0]
    assert variation(spike, 1) == 2 and variation_tilde(spike, 1) == 3


def test_tilde_examples():
    spike = [0.0] * 5 + [1.0] + [0.0] * 5
    for rho in (1, 2, 3.5):
        assert variation_tilde(spike, rho) == pytest.approx(1 + 2 ** (1 / rho))
    assert variation_tilde([0.0] * 4, 2) == 0


def test_rademacher_menshov_examples():
    a = [0, 1, 0, 1, 0]
    assert rademacher_menshov_rhs(a, 0, 2) == pytest.approx(2 * math.sqrt(2))
    assert variation(a, 2) == pytest.approx(2)
    assert rademacher_menshov_rhs([4.0] * 9, 0, 3) == 0
    with pytest.raises(ValueError):
        rademacher_menshov_rhs(a, 4, 2)
    with pytest.raises(ValueError):
        rademacher_menshov_rhs(a[:4], 0, 2)


def test_rademacher_menshov_holds_on_random_sequences():
    rng = np.random.default_rng(1)
    for trial in range(1000):
        m = int(rng.integers(1, 7))
        j0 = int(rng.integers(0, 2**m))
        vals = rng.standard_normal(2**m + 1)
        seq = IndexedSequence.of(vals[j0:].tolist(), range(j0, 2**m + 1))
        assert variation(seq, 2) <= rademacher_menshov_rhs(seq, j0, m) + 1e-12


def test_rademacher_menshov_direct_sum():
    vals = [0.0, 2.0, -1.0, 3.0, 0.5]
    # i = 0: jumps 2, 3, 4, 2.5; i = 1: jumps -1, 1.5; i = 2: jump 0.5
    expect = math.sqrt(2) * (math.sqrt(4 + 9 + 16 + 6.25) + math.sqrt(1 + 2.25) + 0.5)
    assert rademacher_menshov_rhs(vals, 0, 2) == pytest.approx(expect)
    # starting at j0 = 1 drops the i = 0 jump from t = 0 and every coarser block touching 0
    seq = IndexedSequence.of(vals[1:], range(1, 5))
    expect1 = math.sqrt(2) * (math.sqrt(9 + 16 + 6.25) + math.sqrt(2.25) + 0)
    assert rademacher_menshov_rhs(seq, 1, 2) == pytest.approx(expect1)


def test_variation_columns_matches_scalar():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((15, 8))
    cols = variation_columns(A, 2.0)
    assert np.allclose(cols, [variation(A[:, i].tolist(), 2.0) for i in range(8)], rtol=1e-13)
    with pytest.raises(ValueError):
        variation_columns(A[0], 2.0)


def test_non_uniform_indices_do_not_matter():
    vals = [0.3, -1.2, 2.0, 0.1]
    a = IndexedSequence((0, 5, 11, 40), tuple(vals))
    assert variation(a, 2) == pytest.approx(variation(vals, 2))
    assert a.restrict(5, 11).values == (-1.2, 2.0)

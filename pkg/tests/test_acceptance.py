"""End-to-end acceptance checks, each run at its stated tolerance and inside its time limit.

Every test records one PASS/FAIL line that pytest prints in its summary.
"""
import math
import subprocess
import sys

import numpy as np
import pytest

from nilcircle.circle import DecompositionParams, build_multiplier, decompose_kernel
from nilcircle.cli import main as cli_main
from nilcircle.ergodic import IntPolynomial, MomentCurvePlan, commutator_identity_check, cyclic_system, \
    ergodic_average, heisenberg_quotient
from nilcircle.expsums import decay_fit, gauss_sum_complete, gauss_sums_all, nil_gauss_sums_batch, nil_gauss_table
from nilcircle.expsums import _nil_gauss_brute
from nilcircle.group import alternating_word, d_form, inv_arrays, mul_arrays, shape
from nilcircle.quasi import QuasiGeometry, ball_count, comparability_ratio
from nilcircle.quotient_kernels import gauss_operator_kernel
from nilcircle.rationals import RationalSet
from nilcircle.sparse import SparseFunction, convolve, ttstar_kernel
from nilcircle.variation import IndexedSequence, rademacher_menshov_rhs, variation

from oracles import oracle_multiply, oracle_variation


def primes_between(lo, hi):
    return [p for p in range(lo, hi + 1) if p > 1 and all(p % f for f in range(2, math.isqrt(p) + 1))]


def test_group_law_identities(criterion):
    with criterion("group law: exact identities on 10^4 cases, d = 2, 3, 4", 5):
        rng = np.random.default_rng(0)
        cases = 10_000
        for d in (2, 3, 4):
            sh = shape(d)
            X, Y, Z = (rng.integers(-1000, 1001, (cases, sh.size)) for _ in range(3))
            XY = mul_arrays(X, Y, d)
            assert np.array_equal(mul_arrays(XY, Z, d), mul_arrays(X, mul_arrays(Y, Z, d), d))
            e = np.zeros_like(X)
            assert np.array_equal(mul_arrays(X, e, d), X) and np.array_equal(mul_arrays(e, X, d), X)
            Xi = inv_arrays(X, d)
            assert not mul_arrays(X, Xi, d).any() and not mul_arrays(Xi, X, d).any()
            C = Y.copy()
            C[:, : sh.d] = 0
            assert np.array_equal(mul_arrays(C, X, d), mul_arrays(X, C, d))
            lam = rng.integers(1, 6, (cases, 1))
            dil = lambda V: V * lam ** sh.degrees
            S, T = rng.integers(-30, 31, (cases, sh.size)), rng.integers(-30, 31, (cases, sh.size))
            assert np.array_equal(dil(mul_arrays(S, T, d)), mul_arrays(dil(S), dil(T), d))
            n = rng.integers(-40, 41, cases)
            curve = lambda m: np.column_stack([m**l for l in range(1, d + 1)] + [0 * m] * sh.d_prime)
            assert np.array_equal(dil(curve(n)), curve(lam[:, 0] * n))
            # the vectorized law agrees with block-diagonal unipotent matrices
            for i in range(0, cases, 50):
                assert tuple(XY[i]) == oracle_multiply(X[i].tolist(), Y[i].tolist(), d)


def test_word_closed_forms(criterion):
    with criterion("word closed forms equal iterated words, r <= 4, d <= 3, 10^3 tuples", 5):
        rng = np.random.default_rng(1)
        for d in (2, 3):
            for variant in ("D", "Dt"):
                for i in range(1000):
                    r = 1 + i % 4
                    x = rng.integers(-50, 51, r).tolist()
                    y = rng.integers(-50, 51, r).tolist()
                    assert d_form(x, y, variant, d) == alternating_word(x, y, variant, d)


def random_kernel(rng, d, size):
    pts = rng.integers(-1, 2, (size, shape(d).size))
    return SparseFunction.from_arrays(d, pts, rng.standard_normal(size) + 1j * rng.standard_normal(size))


def test_ttstar_identity(criterion):
    with criterion("TT* kernel equals operator composition to 1e-12, r <= 3", 10):
        rng = np.random.default_rng(2)
        for d, support in ((2, 20), (3, 6)):
            for r in (1, 2, 3):
                Ls = [random_kernel(rng, d, support) for _ in range(r)]
                Ks = [random_kernel(rng, d, support) for _ in range(r)]
                f = random_kernel(rng, d, support)
                composed = f
                for L, K in zip(reversed(Ls), reversed(Ks)):
                    composed = convolve(convolve(composed, K), L.adjoint())
                direct = convolve(f, ttstar_kernel(Ls, Ks, r))
                assert (composed - direct).max_abs() <= 1e-12 * max(1.0, direct.max_abs())


def test_circle_method_reconstruction(criterion):
    with criterion("circle-method reconstruction to 1e-9, k = 5..9, exact partition of unity", 60):
        for k in range(5, 10):
            params = DecompositionParams(d=2, tau=2.0, k=k, delta=0.4, delta_p=0.6)
            assert decompose_kernel(params, mode="central").residual < 1e-9
            for dec in decompose_kernel(params, mode="noncentral").values():
                assert dec.residual < 1e-9
            scales, width = params.central_scales(), params.width_central()
            total = build_multiplier(RationalSet.empty(1), scales, width, 4096)
            for s in params.s_range():
                total = total + build_multiplier(RationalSet.farey(1, s), scales, width, 4096)
            assert np.array_equal(total.values + total.complement().values, np.ones(4096))


def test_gauss_sums(criterion):
    with criterion("complete Gauss sums: examples, p^-1/2 law, decay slope -1/2", 30):
        assert abs(gauss_sum_complete((1, 0), 2)) < 1e-9
        assert abs(abs(gauss_sum_complete((0, 1), 3)) - 3**-0.5) < 1e-9
        pts = []
        for p in primes_between(3, 97):
            _, vals, reduced = gauss_sums_all(p, 2)
            top = float(np.max(np.abs(vals[reduced])))
            assert abs(top - p**-0.5) < 1e-6
            pts.append((p, top))
        slope, _, _ = decay_fit(pts)
        assert abs(slope + 0.5) <= 0.02


def test_nil_gauss_sums(criterion):
    with criterion("nilpotent Gauss sums: DP equals brute force, |G| <= 1, decay", 120):
        for q in range(1, 6):
            A = np.array([a for a in np.ndindex(q, q, q) if math.gcd(*a, q) == 1])
            for r in (1, 2):
                for variant in ("G", "Gt"):
                    dp = nil_gauss_sums_batch(A, q, r, 2, variant)
                    brute = _nil_gauss_brute(A, q, r, 2, variant)
                    assert np.max(np.abs(dp - brute)) <= 1e-12
                    assert np.all(np.abs(dp) <= 1 + 1e-12)
        pts = []
        for q in range(2, 21):
            T = np.abs(nil_gauss_table(q, 1, 2))
            assert np.all(T <= 1 + 1e-12)
            reduced = np.gcd.reduce(np.stack(np.indices((q,) * 3) + [np.full((q,) * 3, q)]), axis=0) == 1
            pts.append((q, float(T[reduced].max())))
        slope, _, _ = decay_fit(pts)
        assert slope < 0


def test_variation_norms(criterion):
    with criterion("variation: DP equals exhaustive search, Rademacher-Menshov, rho-monotone", 30):
        rng = np.random.default_rng(3)
        for _ in range(200):
            n = int(rng.integers(1, 13))
            vals = rng.standard_normal(n).tolist()
            rho = float(rng.choice([1.0, 1.5, 2.0, 3.0, 5.0]))
            assert variation(vals, rho) == pytest.approx(oracle_variation(vals, rho), rel=1e-12, abs=1e-12)
        for _ in range(1000):
            m = int(rng.integers(1, 7))
            j0 = int(rng.integers(0, 2**m))
            seq = IndexedSequence.of(rng.standard_normal(2**m + 1 - j0).tolist(), range(j0, 2**m + 1))
            assert variation(seq, 2) <= rademacher_menshov_rhs(seq, j0, m) + 1e-12
        for _ in range(200):
            a = rng.standard_normal(40).tolist()
            vs = [variation(a, r) for r in (1, 1.5, 2, 3, 6, 12)]
            assert all(b <= c + 1e-12 for c, b in zip(vs, vs[1:]))


def test_gauss_kernel_closed_form(criterion):
    with criterion("Gauss-sum kernel: spectral formula equals counting to 1e-10, Q <= 12", 10):
        for d in (2, 3):
            for Q in range(1, 13):
                spectral = gauss_operator_kernel(None, None, Q, d)
                counting = gauss_operator_kernel(None, None, Q, d, method="counting")
                assert spectral.max_abs_diff(counting) <= 1e-10


def test_ergodic_demo(criterion):
    with criterion("ergodic averages converge on cyclic(101); commutator identity exact", 30):
        s = cyclic_system(101)
        f = np.zeros(101)
        f[0] = 1.0
        avg = ergodic_average(s, f, [IntPolynomial((0, 1))], 2**14)
        assert np.max(np.abs(avg - 1 / 101)) < 0.02
        h = heisenberg_quotient(2, 3)
        rng = np.random.default_rng(4)
        for _ in range(100):
            m, n = rng.integers(-10, 11, 2).tolist(), rng.integers(-10, 11, 2).tolist()
            assert commutator_identity_check(h, m, n)


def test_maximal_boundedness_trend(criterion):
    with criterion("maximal averages on G0(2): l^2 ratio grows < 5% from K = 6 to K = 12", 120):
        box = np.array(list(np.ndindex(5, 5, 5))) - 2
        plan = MomentCurvePlan(box, 2, 2.0**12)
        rng = np.random.default_rng(5)
        growth = []
        for _ in range(20):
            v = rng.standard_normal(len(box))
            avgs = np.abs(plan.apply(v, [2.0**k for k in range(13)]))
            short = np.linalg.norm(avgs[:7].max(axis=0)) / np.linalg.norm(v)
            long = np.linalg.norm(avgs.max(axis=0)) / np.linalg.norm(v)
            growth.append(long / short - 1)
        assert np.mean(growth) < 0.05


def test_quasi_geometry(criterion):
    with criterion("quasi-balls: 315 points at r = 2, volume comparability in [4^-3, 4^3]", 10):
        assert ball_count(QuasiGeometry.uniform(2), (0, 0, 0), 2) == 315
        for Q, w in ((1, 0), (2, 0), (1, 5), (3, 3)):
            g = QuasiGeometry.from_scale(2, w, Q=Q)
            base = 2 * Q * 2.0 ** math.floor(0.6 * w)
            for r in base * np.array([1, 1.25, 1.5, 2, 3, 4, 6, 8]):
                assert 4.0**-3 <= comparability_ratio(g, r) <= 4.0**3


def test_cli_determinism(criterion, tmp_path):
    with criterion("CLI: repeated gauss-scan runs give byte-identical CSV", 60):
        outs = []
        for i in range(2):
            path = tmp_path / f"scan{i}.csv"
            assert cli_main(["gauss-scan", "--d", "2", "--q", "3..97", "--seed", "11", "--out", str(path)]) == 0
            outs.append(path.read_bytes())
        proc = subprocess.run([sys.executable, "-m", "nilcircle.cli", "gauss-scan", "--d", "2", "--q", "3..97",
                               "--seed", "11"], capture_output=True, check=True)
        outs.append(proc.stdout)
        assert outs[0] == outs[1] == outs[2]

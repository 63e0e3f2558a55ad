"""Exact-identity checks used by ``nilcircle selfcheck`` and the test-suite.

Each check returns a CheckResult; ``run_all`` collects them.  Group-law
checks run on batched int64 arrays, so 10^4 random cases take milliseconds.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .group import (
    GroupElement,
    alternating_word,
    coset_decompose,
    d_form,
    inv_arrays,
    mul_arrays,
    shape as make_shape,
)
from .quotient_kernels import gauss_operator_kernel
from .sparse import SparseFunction, convolve, ttstar_kernel

__all__ = ["CheckResult", "run_all", "group_law_checks", "word_form_checks", "ttstar_check",
           "coset_check", "gauss_kernel_check", "reconstruction_check"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    cases: int
    seconds: float
    detail: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "cases": self.cases,
                "seconds": round(self.seconds, 3), "detail": self.detail}


def _random_elements(rng: np.random.Generator, d: int, n: int, bound: int = 1000) -> np.ndarray:
    return rng.integers(-bound, bound + 1, size=(n, make_shape(d).size), dtype=np.int64)


def _dilate_arrays(lam: int, X: np.ndarray, d: int) -> np.ndarray:
    return X * lam ** make_shape(d).degrees


def group_law_checks(d: int, cases: int = 10_000, seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    sh = make_shape(d)
    out = []

    def record(name, fn):
        t = time.perf_counter()
        ok = bool(fn())
        out.append(CheckResult(f"{name} (d={d})", ok, cases, time.perf_counter() - t))

    X, Y, Z = (_random_elements(rng, d, cases) for _ in range(3))
    e = np.zeros_like(X)
    record("associativity", lambda: np.array_equal(
        mul_arrays(mul_arrays(X, Y, d), Z, d), mul_arrays(X, mul_arrays(Y, Z, d), d)))
    record("identity", lambda: np.array_equal(mul_arrays(X, e, d), X) and np.array_equal(mul_arrays(e, X, d), X))
    record("inverse", lambda: not mul_arrays(X, inv_arrays(X, d), d).any() and not mul_arrays(inv_arrays(X, d), X, d).any())
    C = Y.copy()
    C[:, : sh.d] = 0
    record("central commutation", lambda: np.array_equal(mul_arrays(C, X, d), mul_arrays(X, C, d)))
    lam = rng.integers(1, 6, size=(cases, 1))
    small = _random_elements(rng, d, cases, bound=30)
    small2 = _random_elements(rng, d, cases, bound=30)
    record("dilation homomorphism", lambda: np.array_equal(
        _dilate_arrays(lam, mul_arrays(small, small2, d), d),
        mul_arrays(_dilate_arrays(lam, small, d), _dilate_arrays(lam, small2, d), d)))

    def curve():
        n = rng.integers(-40, 41, size=cases)
        lam_c = rng.integers(1, 6, size=cases)
        A = np.zeros((cases, sh.size), dtype=np.int64)
        B = np.zeros_like(A)
        for l in range(1, d + 1):
            A[:, l - 1] = n**l
            B[:, l - 1] = (lam_c * n) ** l
        return np.array_equal(_dilate_arrays(lam_c[:, None], A, d), B)

    record("dilation of the moment curve", curve)
    return out


def word_form_checks(d: int, r_max: int = 4, cases: int = 1000, seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    out = []
    for variant in ("D", "Dt"):
        t = time.perf_counter()
        bad = 0
        for i in range(cases):
            r = 1 + i % r_max
            x = [int(v) for v in rng.integers(-50, 51, size=r)]
            y = [int(v) for v in rng.integers(-50, 51, size=r)]
            if d_form(x, y, variant, d) != alternating_word(x, y, variant, d):
                bad += 1
        out.append(CheckResult(f"{variant} closed form (d={d})", bad == 0, cases, time.perf_counter() - t,
                               {"mismatches": bad}))
    return out


def _random_sparse(rng: np.random.Generator, d: int, size: int, bound: int = 3) -> SparseFunction:
    pts = _random_elements(rng, d, size, bound)
    vals = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    return SparseFunction.from_arrays(d, pts, vals)


def ttstar_check(d: int = 2, r_max: int = 3, support: int = 6, seed: int = 0, tol: float = 1e-12,
                 bound: int = 1) -> CheckResult:
    """f * K_1 * L_1^* * ... equals f * A^r with A^r from the word expansion.

    Random kernels live on the box [-bound, bound]^|Y_d|; word supports grow
    like (2 r bound)^(degree) per coordinate, so keep ``bound`` small.
    """
    rng = np.random.default_rng(seed)
    t = time.perf_counter()
    worst = 0.0
    for r in range(1, r_max + 1):
        Ls = [_random_sparse(rng, d, support, bound) for _ in range(r)]
        Ks = [_random_sparse(rng, d, support, bound) for _ in range(r)]
        f = _random_sparse(rng, d, support, bound)
        composed = f
        for L, K in zip(reversed(Ls), reversed(Ks)):
            composed = convolve(convolve(composed, K), L.adjoint())
        direct = convolve(f, ttstar_kernel(Ls, Ks, r))
        worst = max(worst, (composed - direct).max_abs() / max(direct.max_abs(), 1.0))
    return CheckResult(f"TT* word kernel (d={d})", worst <= tol, r_max, time.perf_counter() - t,
                       {"max_relative_error": worst})


def coset_check(d: int, cases: int = 2000, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    t = time.perf_counter()
    ok = True
    for row in _random_elements(rng, d, cases, 500):
        Q = int(rng.integers(1, 13))
        g = GroupElement.from_coords([int(v) for v in row], d)
        pair = coset_decompose(g, Q)
        ok &= pair.recompose() == g and all(0 <= c < Q for c in pair.box.coords) and \
            all(c % Q == 0 for c in pair.lattice.coords)
    return CheckResult(f"coset decomposition (d={d})", bool(ok), cases, time.perf_counter() - t)


def gauss_kernel_check(d: int, Q_max: int = 12, tol: float = 1e-10) -> CheckResult:
    t = time.perf_counter()
    worst = 0.0
    for Q in range(1, Q_max + 1):
        spec = gauss_operator_kernel(None, None, Q, d)
        count = gauss_operator_kernel(None, None, Q, d, method="counting")
        worst = max(worst, spec.max_abs_diff(count))
    return CheckResult(f"Gauss-sum kernel closed form (d={d})", worst <= tol, Q_max, time.perf_counter() - t,
                       {"max_abs_error": worst})


def reconstruction_check(k: int = 5, tol: float = 1e-9) -> CheckResult:
    from .circle import DecompositionParams, decompose_kernel

    t = time.perf_counter()
    params = DecompositionParams(d=2, k=k)
    worst = decompose_kernel(params, mode="central").residual
    for dec in decompose_kernel(params, mode="noncentral").values():
        worst = max(worst, dec.residual)
    return CheckResult(f"circle-method reconstruction (k={k})", worst <= tol, 1, time.perf_counter() - t,
                       {"max_residual": worst})


def run_all(d: int = 2, seed: int = 0, quick: bool = False) -> list[CheckResult]:
    cases = 1000 if quick else 10_000
    results = group_law_checks(d, cases, seed)
    results += word_form_checks(min(d, 3), 4, 200 if quick else 1000, seed)
    results.append(coset_check(d, 200 if quick else 2000, seed))
    results.append(ttstar_check(d, 2 if quick else 3, support=20 if d == 2 else 6, seed=seed))
    if d in (2, 3):
        results.append(gauss_kernel_check(d, 6 if quick else 12))
    if d == 2:
        results.append(reconstruction_check(5))
    return results

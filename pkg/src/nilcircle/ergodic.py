"""Finite measure-preserving systems, polynomial ergodic averages and their maximal/variation operators.

A system is a finite set X with counting measure and invertible maps stored as
index permutations: ``perm[x]`` is the index of T(x).  Products of maps are
read right to left, so T1^a T2^b x applies T2^b first.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Integral, Rational
from typing import Callable, Sequence

import numpy as np

from .cutoffs import chi
from .group import mul_arrays, shape as make_shape
from .sparse import SparseFunction, moment_curve_rows
from .variation import variation_columns

__all__ = [
    "IntPolynomial",
    "NilSystem",
    "StepTwoError",
    "build_nilsystem",
    "cyclic_system",
    "heisenberg_quotient",
    "custom_system",
    "ergodic_average",
    "average_matrix",
    "commutator_identity_check",
    "MaximalReport",
    "maximal_and_variation",
    "group_averages",
    "MomentCurvePlan",
    "power_iteration_norm",
    "sampled_norm_ratio",
]


class StepTwoError(ValueError):
    """The maps do not generate a nilpotent group of step two."""


@dataclass(frozen=True)
class IntPolynomial:
    """Integer polynomial sum_j c_j n^j with c_0 = 0; ``coefficients[j]`` is c_j."""

    coefficients: tuple
    max_degree: int | None = None

    def __post_init__(self):
        coeffs = tuple(self.coefficients)
        if not coeffs:
            coeffs = (0,)
        if not all(isinstance(c, Integral) for c in coeffs):
            raise ValueError("coefficients must be integers")
        coeffs = tuple(int(c) for c in coeffs)
        if coeffs[0] != 0:
            raise ValueError("the constant term must vanish")
        while len(coeffs) > 1 and coeffs[-1] == 0:
            coeffs = coeffs[:-1]
        object.__setattr__(self, "coefficients", coeffs)
        if self.max_degree is not None and self.degree > self.max_degree:
            raise ValueError(f"degree {self.degree} exceeds the configured bound {self.max_degree}")

    @classmethod
    def monomial(cls, j: int, coefficient: int = 1) -> "IntPolynomial":
        if j < 1:
            raise ValueError("monomials must have degree >= 1")
        return cls((0,) * j + (coefficient,))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, n):
        """Value at integer n (or an array of integers); exact Python ints for scalars."""
        if isinstance(n, Integral):
            return sum(c * int(n) ** j for j, c in enumerate(self.coefficients))
        n = np.asarray(n, dtype=object)
        out = np.zeros(n.shape, dtype=object)
        for c in reversed(self.coefficients):
            out = out * n + c
        return out

    def mod(self, n: np.ndarray, m: int) -> np.ndarray:
        """P(n) mod m for an int64 array n, by Horner's rule in modular arithmetic."""
        if m < 1:
            raise ValueError("modulus must be positive")
        n = np.asarray(n, dtype=np.int64) % m
        if m >= 2**31:
            return np.array([self(int(v)) % m for v in n], dtype=np.int64)
        out = np.zeros(n.shape, dtype=np.int64)
        for c in reversed(self.coefficients):
            out = (out * n + c) % m
        return out

    def __str__(self):
        terms = [f"{c}n^{j}" if j > 1 else f"{c}n" for j, c in enumerate(self.coefficients) if c and j]
        return " + ".join(terms) or "0"


def _cycles(perm: np.ndarray):
    """Flat cycle listing and per-point (start, position, length) for fast powers."""
    n = perm.size
    seen = np.zeros(n, dtype=bool)
    flat = np.empty(n, dtype=np.int64)
    start = np.empty(n, dtype=np.int64)
    pos = np.empty(n, dtype=np.int64)
    length = np.empty(n, dtype=np.int64)
    cursor = 0
    for x in range(n):
        if seen[x]:
            continue
        cyc = [x]
        seen[x] = True
        y = int(perm[x])
        while y != x:
            cyc.append(y)
            seen[y] = True
            y = int(perm[y])
        idx = np.array(cyc)
        flat[cursor:cursor + len(cyc)] = idx
        start[idx] = cursor
        pos[idx] = np.arange(len(cyc))
        length[idx] = len(cyc)
        cursor += len(cyc)
    return flat, start, pos, length


@dataclass(frozen=True)
class NilSystem:
    """Finite set of points with invertible generator maps (counting measure)."""

    points: tuple
    generators: tuple
    tag: str = "custom"
    _cycle_data: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        n = len(self.points)
        gens = []
        for i, g in enumerate(self.generators):
            g = np.asarray(g, dtype=np.int64)
            if g.shape != (n,) or not np.array_equal(np.sort(g), np.arange(n)):
                raise ValueError(f"generator {i + 1} is not a permutation of the {n} points")
            g.setflags(write=False)
            gens.append(g)
        if not gens:
            raise ValueError("a system needs at least one map")
        object.__setattr__(self, "generators", tuple(gens))
        object.__setattr__(self, "_cycle_data", tuple(_cycles(g) for g in gens))

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def rank(self) -> int:
        return len(self.generators)

    def order(self, i: int) -> int:
        """Order of the i-th map (0-based) as a permutation."""
        return math.lcm(*{int(v) for v in self._cycle_data[i][3]})

    def power(self, i: int, e: int) -> np.ndarray:
        """Permutation of T_{i+1}^e."""
        flat, start, pos, length = self._cycle_data[i]
        return flat[start + (pos + e) % length]

    def apply_power(self, i: int, state: np.ndarray, e: np.ndarray) -> np.ndarray:
        """T_{i+1}^{e} applied to point indices ``state``, e broadcast against state."""
        flat, start, pos, length = self._cycle_data[i]
        return flat[start[state] + (pos[state] + e) % length[state]]

    def identity(self) -> np.ndarray:
        return np.arange(self.size)

    def word(self, exponents: Sequence[int]) -> np.ndarray:
        """Permutation of T_1^{e_1} T_2^{e_2} ... (rightmost factor acts first)."""
        out = self.identity()
        for i, e in enumerate(exponents):
            out = compose(out, self.power(i, int(e)))
        return out

    def commutator(self, i: int, j: int) -> np.ndarray:
        """S_ij = T_i^-1 T_j^-1 T_i T_j (0-based i, j)."""
        ti, tj = self.generators[i], self.generators[j]
        return compose(compose(invert(ti), invert(tj)), compose(ti, tj))

    def step_two_violations(self) -> list[tuple[int, int, int]]:
        """Triples (i, j, l), 1-based, with [[T_i, T_j], T_l] != Id."""
        bad = []
        ident = self.identity()
        for i, j in itertools.product(range(self.rank), repeat=2):
            s = self.commutator(i, j)
            for l, tl in enumerate(self.generators):
                c = compose(compose(invert(s), invert(tl)), compose(s, tl))
                if not np.array_equal(c, ident):
                    bad.append((i + 1, j + 1, l + 1))
        return bad

    def preserves_measure(self, f: np.ndarray) -> bool:
        f = np.asarray(f)
        return all(np.isclose(f[g].sum(), f.sum()) for g in self.generators)


def compose(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Permutation of a o b (b acts first)."""
    return a[b]


def invert(a: np.ndarray) -> np.ndarray:
    out = np.empty_like(a)
    out[a] = np.arange(a.size)
    return out


def cyclic_system(M: int) -> NilSystem:
    if M < 1:
        raise ValueError("M must be positive")
    return NilSystem(tuple(range(M)), ((np.arange(M) + 1) % M,), tag=f"cyclic({M})")


def heisenberg_quotient(d: int, Q: int) -> NilSystem:
    """X = J_Q with T_i = left translation by the i-th non-central generator, reduced mod H_Q.

    Reducing g = b.h with b in [0, Q)^{Y_d} amounts to reducing every
    coordinate mod Q, because R0(b1, h1) is divisible by Q.
    """
    if Q < 1:
        raise ValueError("Q must be positive")
    sh = make_shape(d)
    m = sh.size
    if Q**m > 2_000_000:
        raise ValueError(f"J_Q has {Q**m} points; too large to tabulate")
    pts = np.array(list(itertools.product(range(Q), repeat=m)), dtype=np.int64).reshape(-1, m)
    radix = Q ** np.arange(m - 1, -1, -1, dtype=np.int64)
    gens = []
    for i in range(d):
        e = np.zeros(m, dtype=np.int64)
        e[i] = 1
        moved = mul_arrays(e[None, :], pts, d) % Q
        gens.append(moved @ radix)
    sysm = NilSystem(tuple(map(tuple, pts.tolist())), tuple(gens), tag=f"heisenberg_quotient({d},{Q})")
    bad = sysm.step_two_violations()
    if bad:
        raise StepTwoError(f"step-two identity fails for triples {bad[:3]}")
    return sysm


def custom_system(generators: Sequence[Sequence[int]], points: Sequence | None = None) -> NilSystem:
    """User-supplied permutations; rejected unless they generate a step-two nilpotent group."""
    gens = [np.asarray(g, dtype=np.int64) for g in generators]
    if not gens:
        raise ValueError("need at least one permutation")
    n = gens[0].size
    sysm = NilSystem(tuple(points) if points is not None else tuple(range(n)), tuple(gens))
    bad = sysm.step_two_violations()
    if bad:
        raise StepTwoError(f"[[T_i, T_j], T_l] != Id for (i, j, l) = {bad[0]}")
    return sysm


def build_nilsystem(spec: dict) -> NilSystem:
    """Build from a dict: {"kind": "cyclic", "M"}, {"kind": "heisenberg_quotient", "d", "Q"}
    or {"kind": "custom", "generators", optional "points"}."""
    kind = spec.get("kind")
    if kind == "cyclic":
        return cyclic_system(int(spec["M"]))
    if kind == "heisenberg_quotient":
        return heisenberg_quotient(int(spec["d"]), int(spec["Q"]))
    if kind == "custom":
        return custom_system(spec["generators"], spec.get("points"))
    raise ValueError(f"unknown system kind {kind!r}")


# ---------------------------------------------------------------------------
# averages

def _is_exact_values(f) -> bool:
    return all(isinstance(v, (Integral, Rational)) and not isinstance(v, bool) for v in f)


def _weights(N: int, smooth) -> tuple[np.ndarray, np.ndarray, bool]:
    """Window n and weights; rough averages return integer weight 1 (exact)."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if smooth is None:
        n = np.arange(-N, N + 1)
        return n, np.ones(n.size, dtype=np.int64), True
    weight = chi if smooth == "chi" else smooth
    if not callable(weight):
        raise ValueError("smooth must be None, 'chi' or a callable weight")
    n = np.arange(-2 * N, 2 * N + 1)
    w = np.asarray(weight(n / N), dtype=float) / N
    keep = w != 0
    return n[keep], w[keep], False


def _orbit_indices(sysm: NilSystem, polys: Sequence[IntPolynomial], n: np.ndarray) -> np.ndarray:
    """(len(n), |X|) array of T_1^{P_1(n)} ... T_r^{P_r(n)} x."""
    state = np.broadcast_to(sysm.identity(), (n.size, sysm.size)).copy()
    for i in reversed(range(sysm.rank)):
        e = polys[i].mod(n, sysm.order(i))
        state = sysm.apply_power(i, state, e[:, None])
    return state


def average_matrix(sysm: NilSystem, polys: Sequence[IntPolynomial], N: int, smooth=None) -> np.ndarray:
    """Matrix of the averaging operator on functions of X (row x, column y)."""
    _check_arity(sysm, polys)
    n, w, exact = _weights(N, smooth)
    mat = np.zeros((sysm.size, sysm.size))
    rows = np.arange(sysm.size)
    for s in range(0, n.size, 4096):
        idx = _orbit_indices(sysm, polys, n[s:s + 4096])
        np.add.at(mat, (np.broadcast_to(rows, idx.shape), idx), np.broadcast_to(w[s:s + 4096, None], idx.shape))
    return mat / n.size if exact else mat


def _check_arity(sysm: NilSystem, polys):
    if len(polys) != sysm.rank:
        raise ValueError(f"{len(polys)} polynomials for {sysm.rank} maps")


def ergodic_average(sysm: NilSystem, f, polys: Sequence[IntPolynomial], N: int, smooth=None) -> np.ndarray:
    """A_N f(x) = |[-N, N]|^-1 sum_n f(T_1^{P_1(n)} ... x), or with weights N^-1 w(n/N).

    ``smooth`` is None (rough), "chi", or any callable weight.  Integer and
    Fraction inputs with the rough average give exact Fraction outputs.
    """
    _check_arity(sysm, polys)
    f = list(f) if not isinstance(f, np.ndarray) else f
    if len(f) != sysm.size:
        raise ValueError(f"f has {len(f)} values for {sysm.size} points")
    n, w, exact = _weights(N, smooth)
    exact = exact and _is_exact_values(f)
    if exact:
        counts = np.zeros((sysm.size, sysm.size), dtype=np.int64)
        rows = np.arange(sysm.size)
        for s in range(0, n.size, 4096):
            idx = _orbit_indices(sysm, polys, n[s:s + 4096])
            np.add.at(counts, (np.broadcast_to(rows, idx.shape), idx), 1)
        vals = [Fraction(v) for v in f]
        total = n.size
        return np.array(
            [sum((int(c) * v for c, v in zip(row, vals) if c), Fraction(0)) / total for row in counts],
            dtype=object,
        )
    fa = np.asarray(f, dtype=complex if np.iscomplexobj(np.asarray(f)) else float)
    out = np.zeros(sysm.size, dtype=fa.dtype)
    for s in range(0, n.size, 4096):
        idx = _orbit_indices(sysm, polys, n[s:s + 4096])
        out = out + (w[s:s + 4096, None] * fa[idx]).sum(axis=0)
    return out / n.size if smooth is None else out


def commutator_identity_check(sysm: NilSystem, m: Sequence[int], n: Sequence[int]) -> bool:
    """prod T_i^{m_i} prod T_j^{n_j} == prod T_j^{m_j + n_j} prod_{i<j} S_ji^{m_j n_i} as permutations."""
    if len(m) != sysm.rank or len(n) != sysm.rank:
        raise ValueError("exponent vectors must have one entry per map")
    lhs = compose(sysm.word(m), sysm.word(n))
    rhs = sysm.word([a + b for a, b in zip(m, n)])
    for i in range(sysm.rank):
        for j in range(i + 1, sysm.rank):
            e = int(m[j]) * int(n[i])
            s = sysm.commutator(j, i)
            rhs = compose(rhs, _perm_power(s, e))
    return bool(np.array_equal(lhs, rhs))


def _perm_power(p: np.ndarray, e: int) -> np.ndarray:
    flat, start, pos, length = _cycles(p)
    return flat[start + (pos + e) % length]


# ---------------------------------------------------------------------------
# maximal and variation operators

@dataclass
class MaximalReport:
    """Pointwise sup_k |A_{N_k} f| and V^rho(A_{N_k} f: k), with l^p norms."""

    scales: list
    rho: float
    p: float
    sup: np.ndarray
    var: np.ndarray
    averages: np.ndarray
    points: np.ndarray | None
    f_norm: float

    @property
    def sup_norm(self) -> float:
        return _lp(self.sup, self.p)

    @property
    def var_norm(self) -> float:
        return _lp(self.var, self.p)

    @property
    def sup_ratio(self) -> float:
        return self.sup_norm / self.f_norm

    @property
    def var_ratio(self) -> float:
        return self.var_norm / self.f_norm

    def summary(self) -> dict:
        return {
            "scales": [float(s) for s in self.scales],
            "rho": self.rho,
            "p": self.p,
            "f_norm": self.f_norm,
            "sup_norm": self.sup_norm,
            "var_norm": self.var_norm,
            "sup_ratio": self.sup_ratio,
            "var_ratio": self.var_ratio,
        }


def _lp(a: np.ndarray, p: float) -> float:
    a = np.abs(np.asarray(a))
    if p == math.inf:
        return float(a.max()) if a.size else 0.0
    return float(np.sum(a**p) ** (1 / p))


def _row_keys(pts: np.ndarray) -> np.ndarray | None:
    """Injective int64 keys for integer rows (mixed radix), or None when the box is too large."""
    lo = pts.min(axis=0)
    span = pts.max(axis=0) - lo + 1
    if float(np.prod(span.astype(float))) >= 2**62:
        return None
    radix = np.cumprod(np.concatenate([[1], span[::-1][:-1]]))[::-1]
    return (pts - lo) @ radix


class MomentCurvePlan:
    """Output points A0(n) . z for a fixed support and |n| <= R, built once.

    Every average over that support is then a weighted bincount over the
    same point list, so many input functions and scales reuse one plan.
    """

    def __init__(self, support: np.ndarray, d: int, top: float, smooth: bool = True):
        support = np.asarray(support, dtype=np.int64)
        if not len(support):
            raise ValueError("empty support")
        self.d = d
        self.smooth = smooth
        self.support = support
        self.top = top
        R = math.floor((2 if smooth else 1) * top)
        self.n = np.arange(-R, R + 1)
        A = moment_curve_rows(self.n, d)
        pts = mul_arrays(A[:, None, :], support[None, :, :].astype(A.dtype), d).reshape(-1, support.shape[1])
        keys = _row_keys(pts) if pts.dtype != object else None
        if keys is None:
            self.points, inv = np.unique(pts, axis=0, return_inverse=True)
        else:
            _, first, inv = np.unique(keys, return_index=True, return_inverse=True)
            self.points = pts[first]
        self.inverse = inv.ravel()

    def weights(self, N: float) -> np.ndarray:
        if N > self.top:
            raise ValueError(f"scale {N} exceeds the plan's largest scale {self.top}")
        if self.smooth:
            return chi(self.n / N) / N
        return (np.abs(self.n) <= N) / (2 * math.floor(N) + 1)

    def apply(self, values: np.ndarray, scales: Sequence[float]) -> np.ndarray:
        """(len(scales), len(points)) array of M_N f for f = values on the support."""
        values = np.asarray(values)
        size = len(self.points)
        out = np.zeros((len(scales), size), dtype=complex if np.iscomplexobj(values) else float)
        for i, N in enumerate(scales):
            contrib = (self.weights(N)[:, None] * values[None, :]).ravel()
            if np.iscomplexobj(contrib):
                out[i] = np.bincount(self.inverse, contrib.real, size) + 1j * np.bincount(self.inverse, contrib.imag, size)
            else:
                out[i] = np.bincount(self.inverse, contrib, size)
        return out


def group_averages(f: SparseFunction, scales: Sequence[float], smooth: bool = True):
    """M_N f = f * K_N on G0(d) for every N in ``scales``, on the union of their supports.

    K_N puts weight N^-1 chi(n / N) (or (2N+1)^-1 on |n| <= N when smooth is
    False) at A0(n).  Returns (points, values) with values of shape
    (len(scales), len(points)).
    """
    z, v = f.arrays()
    if not len(z):
        raise ValueError("f has empty support")
    plan = MomentCurvePlan(z, f.d, max(scales), smooth)
    return plan.points, plan.apply(v, scales)


def maximal_and_variation(
    target,
    f,
    scales: Sequence[float],
    rho: float = 2.0,
    polys: Sequence[IntPolynomial] | None = None,
    p: float = 2.0,
    smooth=None,
) -> MaximalReport:
    """sup and V^rho of the averages over ``scales``, on a NilSystem or on G0(d).

    ``target`` is a NilSystem (then f is a function on its points and
    ``polys`` is required) or the string "G0" (then f is a SparseFunction and
    the averages are along the moment curve; ``smooth`` defaults to chi).
    """
    scales = list(scales)
    if not scales:
        raise ValueError("empty scale list")
    if isinstance(target, NilSystem):
        if polys is None:
            raise ValueError("polynomials are required for a system")
        fa = np.asarray(f, dtype=complex if np.iscomplexobj(np.asarray(f)) else float)
        avgs = np.stack([np.asarray(ergodic_average(target, fa, polys, int(N), smooth)) for N in scales])
        points = None
        f_norm = _lp(fa, p)
    elif target == "G0":
        if not isinstance(f, SparseFunction):
            raise ValueError("on G0 the input must be a SparseFunction")
        points, avgs = group_averages(f, scales, smooth=smooth is not False)
        f_norm = _lp(f.arrays()[1], p)
    else:
        raise ValueError(f"unknown target {target!r}")
    sup = np.abs(avgs).max(axis=0)
    var = variation_columns(avgs, rho) if len(scales) > 1 else np.zeros(avgs.shape[1])
    return MaximalReport(scales, rho, p, sup, var, avgs, points, f_norm)


def power_iteration_norm(
    sysm: NilSystem, polys: Sequence[IntPolynomial], N: int, smooth=None, iters: int = 200, seed: int = 0
) -> float:
    """l^2 operator norm of A_N by power iteration on A^T A (a lower bound that converges from below)."""
    mat = average_matrix(sysm, polys, N, smooth)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(sysm.size)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(iters):
        y = mat.T @ (mat @ x)
        nrm = np.linalg.norm(y)
        if nrm == 0:
            return 0.0
        est = math.sqrt(nrm)
        x = y / nrm
    return est


def sampled_norm_ratio(operator: Callable[[np.ndarray], np.ndarray], size: int, trials: int = 20,
                       p: float = 2.0, seed: int = 0, nonnegative: bool = False) -> tuple[float, int]:
    """max ||op f||_p / ||f||_p over random f; a lower bound on the operator norm, with the trial count."""
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(trials):
        f = rng.random(size) if nonnegative else rng.standard_normal(size)
        best = max(best, _lp(operator(f), p) / _lp(f, p))
    return best, trials

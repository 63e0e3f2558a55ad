"""Two-stage circle-method decomposition of the moment-curve kernels K_k.

Every torus integral of the form

    int_T^m e(g . xi) sum_{a/q in A} eta_{<=W}(tau^k o (xi - a/q)) dxi

is evaluated exactly by unfolding the periodic sum: it equals
B(g) * C_A(g), where B is the Fourier transform of the dilated radial bump
on R^m and C_A(g) = sum_{a/q in A mod 1} e(g . a/q) is an integer
(a generalized Ramanujan sum).  This is the default ("analytic") route.

The "dft" route samples the multipliers on a uniform grid (Z_M / M)^m and
uses FFTs instead.  It is only usable when the grid resolves every bump and
exceeds every probed coordinate; otherwise it refuses to run.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .cutoffs import bump_fourier, chi, chi_prime, eta0, smooth_step
from .group import GroupShape, shape as make_shape
from .rationals import (
    RationalSet,
    divisors,
    factorial_denominator,
    kappa,
    lcm_upto,
    mobius,
)
from .sparse import SparseFunction

__all__ = [
    "DecompositionParams",
    "MultiplierGrid",
    "AliasingError",
    "build_multiplier",
    "evaluate_multiplier",
    "disjointness_margin",
    "decompose_kernel",
    "Decomposition",
    "frequency_kernel_S",
    "moment_weights",
    "kernel_L",
    "kernel_L_dft",
    "phi_cutoff",
]


class AliasingError(ValueError):
    """The frequency grid is too coarse for the requested kernel window."""


@dataclass(frozen=True)
class DecompositionParams:
    """Desk-scale constants of the decomposition.

    ``central_width`` / ``noncentral_width`` override the bump widths
    (default delta*k for the central multipliers and delta'*k for the
    non-central ones).  ``Q_stand_in`` replaces the factorial denominator
    by lcm(1..Q_stand_in) unless ``exact_Q`` is set.
    """

    d: int = 2
    tau: float = 2.0
    delta: float = 0.4
    delta_p: float = 0.6
    D: float = 4.0
    k: int = 6
    M: int | None = None
    Q_stand_in: int = 4
    exact_Q: bool = False
    central_width: float | None = None
    noncentral_width: float | None = None

    def __post_init__(self):
        if not (1.0 < self.tau <= 2.0):
            raise ValueError(f"tau must lie in (1, 2], got {self.tau}")
        if not (0 < self.delta < 1 and 0 < self.delta_p < 1):
            raise ValueError("delta and delta' must lie in (0, 1)")
        if self.delta > self.delta_p:
            raise ValueError(f"need delta <= delta', got {self.delta} > {self.delta_p}")
        if self.d < 1 or self.k < 0:
            raise ValueError("need d >= 1 and k >= 0")
        if self.M is not None and self.M < 2:
            raise ValueError("grid size must be at least 2")

    @property
    def shape(self) -> GroupShape:
        return make_shape(self.d)

    def with_k(self, k: int) -> "DecompositionParams":
        return DecompositionParams(**{**asdict(self), "k": k})

    def width_central(self, k: int | None = None) -> float:
        k = self.k if k is None else k
        return self.central_width if self.central_width is not None else self.delta * k

    def width_noncentral(self, k: int | None = None) -> float:
        k = self.k if k is None else k
        return self.noncentral_width if self.noncentral_width is not None else self.delta_p * k

    def Q(self, s: int) -> int:
        if self.exact_Q:
            return factorial_denominator(s, self.D, self.tau)
        return lcm_upto(self.Q_stand_in)

    def kappa(self, s: int) -> float:
        return kappa(s, self.D, self.tau)

    def s_range(self, k: int | None = None) -> range:
        return range(0, math.floor(self.width_central(k) + 1e-12) + 1)

    def t_range(self, k: int | None = None) -> range:
        return range(0, math.floor(self.width_noncentral(k) + 1e-12) + 1)

    def central_scales(self, k: int | None = None) -> np.ndarray:
        k = self.k if k is None else k
        return np.array([self.tau ** (k * (l1 + l2)) for l1, l2 in self.shape.central_indices])

    def noncentral_scales(self, k: int | None = None) -> np.ndarray:
        k = self.k if k is None else k
        return np.array([self.tau ** (k * l) for l in range(1, self.d + 1)])

    def as_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# cutoffs phi_k and the weights of L_k

def phi_cutoff(g: np.ndarray, scales: np.ndarray, width: float, tau: float) -> np.ndarray:
    """eta_{<=width}(tau^-k o g), with tau^k o given by ``scales``."""
    g = np.asarray(g, dtype=float)
    r = np.sqrt(np.sum((g / scales) ** 2, axis=-1))
    return eta0(r * tau ** (-math.floor(width)))


def moment_weights(k: int, tau: float, iota: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """n and tau^-k chi(tau^-k n) (iota=0) or tau^-k chi'(tau^-k n) (iota=1), nonzero ones only."""
    N = tau**k
    R = math.floor((2 * tau if iota else 2) * N)
    n = np.arange(-R, R + 1)
    w = (chi_prime(n / N, tau) if iota else chi(n / N)) / N
    keep = w != 0
    return n[keep], w[keep]


def _powers(n: np.ndarray, d: int) -> np.ndarray:
    n = np.asarray(n, dtype=np.int64)
    if n.size and float(np.abs(n).max()) ** d >= 2**62:
        raise OverflowError("moment-curve coordinates exceed int64")
    return np.stack([n**l for l in range(1, d + 1)], axis=-1)


def kernel_L(g1: np.ndarray, k: int, tau: float, d: int, iota: int = 0) -> np.ndarray:
    """Direct evaluation of L_k(g1) = sum_n tau^-k chi(tau^-k n) 1[g1 = A0(n)]."""
    g1 = np.atleast_2d(np.asarray(g1, dtype=np.int64))
    n, w = moment_weights(k, tau, iota)
    lookup = {tuple(row): wi for row, wi in zip(_powers(n, d).tolist(), w.tolist())}
    return np.array([lookup.get(tuple(row), 0.0) for row in g1.tolist()])


def frequency_kernel_S(k: int, xi, iota: int = 0, tau: float = 2.0) -> np.ndarray:
    """S_k(xi) = sum_n tau^-k chi(tau^-k n) e(-A0(n) . xi); iota=1 gives S_{k+1} - S_k."""
    xi = np.asarray(xi, dtype=float)
    single = xi.ndim == 1
    xi = np.atleast_2d(xi)
    d = xi.shape[-1]
    if iota:
        return (frequency_kernel_S(k + 1, xi, 0, tau) - frequency_kernel_S(k, xi, 0, tau))[0 if single else slice(None)]
    n, w = moment_weights(k, tau)
    out = np.zeros(xi.shape[0], dtype=complex)
    for start in range(0, n.size, 4096):
        P = _powers(n[start:start + 4096], d).astype(float)
        phase = np.mod(xi @ P.T, 1.0)
        out += np.exp(-2j * np.pi * phase) @ w[start:start + 4096]
    return out[0] if single else out


# ---------------------------------------------------------------------------
# multiplier grids

@dataclass
class MultiplierGrid:
    """A 1-periodic multiplier sampled on (Z_M / M)^m."""

    m: int
    M: int
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.shape != (self.M,) * self.m:
            raise ValueError(f"values must have shape {(self.M,) * self.m}")

    def __add__(self, other: "MultiplierGrid") -> "MultiplierGrid":
        return MultiplierGrid(self.m, self.M, self.values + other.values, {"sum": [self.meta, other.meta]})

    def complement(self) -> "MultiplierGrid":
        return MultiplierGrid(self.m, self.M, 1.0 - self.values, {**self.meta, "complement": True})

    def mean(self) -> float:
        """Zero Fourier mode: the grid average, i.e. the torus integral by the rectangle rule."""
        return float(self.values.mean())

    def in_unit_range(self, atol: float = 1e-12) -> bool:
        return bool(self.values.min() >= -atol and self.values.max() <= 1 + atol)

    def inverse_dft(self) -> np.ndarray:
        """(1/M^m) sum_j e(g . j/M) values[j], indexed by g mod M."""
        return np.fft.ifftn(self.values)

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"j{i + 1}" for i in range(self.m)] + ["value"])
        for idx in np.ndindex(*self.values.shape):
            w.writerow(list(idx) + [repr(float(self.values[idx]))])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def _centers(rset: RationalSet | np.ndarray) -> np.ndarray:
    if isinstance(rset, RationalSet):
        return rset.centers()
    return np.atleast_2d(np.asarray(rset, dtype=float))


def build_multiplier(
    rset: RationalSet | np.ndarray,
    scales: Sequence[float],
    width: float,
    M: int,
    tau: float = 2.0,
    meta: dict | None = None,
) -> MultiplierGrid:
    """Sample sum_{a/q in set} eta_{<=width}(scales o (xi - a/q)) on the grid j/M.

    ``scales`` are the per-axis factors of the partial dilation tau^k o.
    Periodic images are included automatically, so the result is exact even
    when a bump is wider than one period.
    """
    scales = np.asarray(scales, dtype=float)
    m = scales.size
    R = tau ** math.floor(width) if width >= 0 else 0.0
    grid = np.zeros((M,) * m)
    if R == 0:
        return MultiplierGrid(m, M, grid, dict(meta or {}))
    rad = 2.0 * R / scales
    for c in _centers(rset):
        idx, offs = [], []
        for i in range(m):
            lo = math.ceil((c[i] - rad[i]) * M)
            hi = math.floor((c[i] + rad[i]) * M)
            j = np.arange(lo, hi + 1)
            idx.append(j % M)
            offs.append((j / M - c[i]) * scales[i] / R)
        if any(len(j) == 0 for j in idx):
            continue
        r2 = sum(np.ix_(*offs)[i] ** 2 for i in range(m))
        vals = smooth_step(2.0 - np.sqrt(r2))
        np.add.at(grid, np.ix_(*idx), vals)
    info = {"width": width, "tau": tau, "scales": scales.tolist()}
    if isinstance(rset, RationalSet):
        info["set"] = rset.label
    info.update(meta or {})
    return MultiplierGrid(m, M, grid, info)


def evaluate_multiplier(
    points: np.ndarray,
    centers: np.ndarray,
    scales: Sequence[float],
    width: float,
    tau: float = 2.0,
    periodic: bool = True,
) -> np.ndarray:
    """Off-grid evaluation of the same bump sum at arbitrary points.

    With ``periodic`` the nearest image of each center is used, which is exact
    as long as every bump is narrower than half a period.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    scales = np.asarray(scales, dtype=float)
    R = tau ** math.floor(width)
    diff = points[:, None, :] - centers[None, :, :]
    if periodic:
        if np.any(2 * R / scales >= 0.5):
            raise ValueError("bumps wider than half a period; use build_multiplier")
        diff = diff - np.round(diff)
    r = np.sqrt(np.sum((diff * scales / R) ** 2, axis=-1))
    return smooth_step(2.0 - r).sum(axis=1)


def disjointness_margin(rset: RationalSet, scales: Sequence[float], width: float, tau: float = 2.0) -> float:
    """min_i scales_i / q_max^2 divided by 4 tau^floor(width).

    Two distinct fractions with denominators <= q_max differ by at least
    1/q_max^2 in some coordinate, so a margin > 1 certifies that the bumps
    (radius 2 tau^floor(width) in the dilated norm) are pairwise disjoint.
    """
    qmax = rset.max_denominator
    if qmax <= 1:
        return math.inf
    return float(np.min(scales)) / qmax**2 / (4 * tau ** math.floor(width))


# ---------------------------------------------------------------------------
# exact torus integrals via Ramanujan sums

def _mobius_coefficients(denominators: Iterable[int]) -> dict[int, int]:
    """coef[e] with sum_{q in set} c_q(v) = sum_e coef[e] e^m [e | v]."""
    coef: dict[int, int] = {}
    for q in denominators:
        for e in divisors(q):
            mu = mobius(q // e)
            if mu:
                coef[e] = coef.get(e, 0) + mu
    return {e: c for e, c in coef.items() if c}


class _DivisibilityTable:
    """Indicators [e | gcd(v)] for the integer frequency rows v, shared across sets."""

    def __init__(self, v: np.ndarray):
        v = np.asarray(v, dtype=np.int64)
        self.g = np.abs(np.gcd.reduce(v, axis=-1)) if v.shape[-1] > 1 else np.abs(v[..., 0])
        self._cache: dict[int, np.ndarray] = {}

    def __call__(self, e: int) -> np.ndarray:
        if e not in self._cache:
            self._cache[e] = self.g % e == 0
        return self._cache[e]


def _set_sum(table: _DivisibilityTable, rset: RationalSet, m: int) -> np.ndarray:
    out = np.zeros(table.g.shape)
    for e, c in _mobius_coefficients(rset.denominators).items():
        out += c * float(e) ** m * table(e)
    return out


def _central_integral(g2: np.ndarray, rset: RationalSet, scales: np.ndarray, width: float, tau: float) -> np.ndarray:
    """int_T e(g2 . xi) Xi(xi) dxi for the bump sum over ``rset``."""
    g2 = np.atleast_2d(np.asarray(g2, dtype=np.int64))
    table = _DivisibilityTable(g2)
    return bump_fourier(g2, scales, width, tau) * _set_sum(table, rset, scales.size)


def _noncentral_integrals(
    g1: np.ndarray,
    sets: dict[str, RationalSet],
    k: int,
    width: float,
    tau: float,
    d: int,
    weights: tuple[np.ndarray, np.ndarray],
    chunk: int = 2_000_000,
) -> dict[str, np.ndarray]:
    """sum_n w_n int_T e((g1 - A0(n)) . xi) Psi_set(xi) dxi for every named set, at every g1."""
    g1 = np.atleast_2d(np.asarray(g1, dtype=np.int64))
    n, w = weights
    A = _powers(n, d)
    scales = np.array([tau ** (k * l) for l in range(1, d + 1)])
    coefs = {name: _mobius_coefficients(rs.denominators) for name, rs in sets.items()}
    needed = sorted({e for c in coefs.values() for e in c})
    out = {name: np.zeros(len(g1)) for name in sets}
    rows = max(1, chunk // max(1, len(n)))
    for start in range(0, len(g1), rows):
        G = g1[start:start + rows]
        V = G[:, None, :] - A[None, :, :]
        WB = bump_fourier(V, scales, width, tau) * w[None, :]
        table = _DivisibilityTable(V)
        partial = {e: (WB * table(e)).sum(axis=1) for e in needed}
        for name, coef in coefs.items():
            acc = np.zeros(len(G))
            for e, c in coef.items():
                acc += c * float(e) ** d * partial[e]
            out[name][start:start + rows] = acc
    return out


# ---------------------------------------------------------------------------
# DFT route

def _check_grid(M: int, max_coord: float, scales: np.ndarray, width: float, tau: float):
    if M is None:
        raise AliasingError("the dft route needs a grid size M")
    if M <= 2 * max_coord:
        raise AliasingError(f"grid size {M} does not exceed twice the largest probed coordinate {max_coord}")
    R = tau ** math.floor(width)
    # bump radius in grid cells along the narrowest axis
    cells = 2 * R / float(np.max(scales)) * M
    if cells < 8:
        raise AliasingError(f"grid size {M} resolves the narrowest bump with only {cells:.2g} cells")


def kernel_L_dft(g1: np.ndarray, k: int, tau: float, d: int, M: int, psi: MultiplierGrid | None = None,
                 iota: int = 0) -> np.ndarray:
    """L(g1) = int_T^d e(g1 . xi) S_k(xi) Psi(xi) dxi by FFT on (Z_M / M)^d (no phi cutoff)."""
    g1 = np.atleast_2d(np.asarray(g1, dtype=np.int64))
    n, w = moment_weights(k, tau, iota)
    A = _powers(n, d)
    if M <= 2 * max(np.abs(A).max(), np.abs(g1).max()):
        raise AliasingError(f"grid size {M} aliases the moment curve at scale k={k}")
    spikes = np.zeros((M,) * d)
    np.add.at(spikes, tuple((A % M).T), w)
    S = np.fft.fftn(spikes)  # S[j] = sum_n w_n e(-A0(n) . j / M)
    if psi is not None:
        S = S * psi.values
    L = np.fft.ifftn(S)
    return L[tuple((g1 % M).T)].real


# ---------------------------------------------------------------------------
# decomposition

@dataclass
class Decomposition:
    """Named component kernels sampled on a finite probe window."""

    mode: str
    params: DecompositionParams
    source: SparseFunction
    components: dict[str, SparseFunction]
    probes: np.ndarray
    extra: dict = field(default_factory=dict)

    def resum(self) -> SparseFunction:
        total = SparseFunction.zero(self.source.shape)
        for comp in self.components.values():
            total = total + comp
        return total

    @property
    def residual(self) -> float:
        """max over the probe window of |source - sum of components|."""
        total = np.zeros(len(self.probes), dtype=complex)
        for comp in self.components.values():
            total += np.array([complex(comp(tuple(p))) for p in self.probes.tolist()])
        src = np.array([complex(self.source(tuple(p))) for p in self.probes.tolist()])
        return float(np.max(np.abs(src - total))) if len(self.probes) else 0.0

    def report(self) -> dict:
        comps = {}
        for name, f in self.components.items():
            comps[name] = {
                "support": len(f),
                "mass": complex(f.total()).real,
                "max_abs": f.max_abs(),
            }
        return {
            "mode": self.mode,
            "params": self.params.as_dict(),
            "probe_points": int(len(self.probes)),
            "source": {"support": len(self.source), "mass": complex(self.source.total()).real},
            "components": comps,
            "reconstruction_residual": self.residual,
            **self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.report(), indent=2, sort_keys=True)


def _product_kernel(d: int, g1: np.ndarray, L: np.ndarray, g2: np.ndarray, N: np.ndarray) -> SparseFunction:
    entries = {}
    for a, lv in zip(g1.tolist(), L.tolist()):
        if lv == 0:
            continue
        for b, nv in zip(g2.tolist(), N.tolist()):
            entries[tuple(a) + tuple(b)] = lv * nv
    return SparseFunction(d, entries)


def _central_window(dp: int, radius: int) -> np.ndarray:
    axes = [np.arange(-radius, radius + 1)] * dp
    if dp == 0:
        return np.zeros((1, 0), dtype=np.int64)
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dp).astype(np.int64)


def _central_pieces(params: DecompositionParams, k: int, g2: np.ndarray, route: str, sets: dict[str, RationalSet],
                    union: RationalSet, width: float) -> dict[str, np.ndarray]:
    """N pieces on the central window; the complement comes from the union set."""
    tau = params.tau
    scales = params.central_scales(k)
    phi2 = phi_cutoff(g2, scales, params.width_central(k), tau)
    zero = np.all(g2 == 0, axis=-1).astype(float)
    out = {}
    if route == "analytic":
        for name, rs in sets.items():
            out[name] = phi2 * _central_integral(g2, rs, scales, width, tau)
        out["complement"] = phi2 * (zero - _central_integral(g2, union, scales, width, tau))
        return out
    M = params.M
    _check_grid(M, np.abs(g2).max(initial=0), scales, width, tau)
    dp = scales.size
    idx = tuple((g2 % M).T)
    total = MultiplierGrid(dp, M, np.zeros((M,) * dp))
    for name, rs in sets.items():
        grid = build_multiplier(rs, scales, width, M, tau)
        total = total + grid
        out[name] = phi2 * grid.inverse_dft()[idx].real
    comp = total.complement()
    out["complement"] = phi2 * comp.inverse_dft()[idx].real
    return out


def decompose_kernel(
    params: DecompositionParams,
    mode: str = "central",
    s: int | None = None,
    A: RationalSet | None = None,
    B: RationalSet | None = None,
    w: int | None = None,
    iota: int = 0,
    central_radius: int = 2,
    off_curve: int = 64,
    route: str = "analytic",
) -> Decomposition | dict[int, Decomposition]:
    """Split K_k into major/minor arc pieces and sample them on a probe window.

    mode="central": K_k = K_k^c + sum_s K_{k,s}.
    mode="noncentral": for each s (or the given one), K_{k,s} = G^low + sum_t G_{k,s,t} + G^c.
    mode="generalized": K_{k,w,A,B} (iota=0) or K'_{k,w,A,B} (iota=1).

    The probe window is the support of L_k in the non-central variables
    (plus ``off_curve`` shifted points in the non-central stage) times the
    central box |g2| <= central_radius.
    """
    if route not in ("analytic", "dft"):
        raise ValueError(f"unknown route {route!r}")
    k, tau, d = params.k, params.tau, params.d
    sh = params.shape
    dp = sh.d_prime
    n, wts = moment_weights(k, tau)
    curve = _powers(n, d)
    L = wts
    g2 = _central_window(dp, central_radius)

    if mode == "central":
        width = params.width_central(k)
        sets = {f"K_{k},{s_}": RationalSet.farey(dp, s_, tau) for s_ in params.s_range(k)}
        union = RationalSet.farey_upto(dp, width, tau)
        N = _central_pieces(params, k, g2, route, sets, union, width)
        comps = {name: _product_kernel(d, curve, L, g2, N[name]) for name in sets}
        comps[f"K_{k}^c"] = _product_kernel(d, curve, L, g2, N["complement"])
        source = _product_kernel(d, curve, L, g2, np.all(g2 == 0, axis=-1).astype(float))
        probes = np.concatenate([np.repeat(curve, len(g2), 0), np.tile(g2, (len(curve), 1))], axis=1)
        return Decomposition(mode, params, source, comps, probes, {
            "disjointness_margin": disjointness_margin(union, params.central_scales(k), width, tau),
            "route": route,
        })

    if mode == "noncentral":
        s_values = [s] if s is not None else list(params.s_range(k))
        width_c = params.width_central(k)
        width_n = params.width_noncentral(k)
        rng = np.random.default_rng(k)
        shifts = np.zeros((off_curve, d), dtype=np.int64)
        if off_curve:
            shifts[np.arange(off_curve), rng.integers(0, d, off_curve)] = rng.choice([-1, 1], off_curve)
            base = curve[rng.integers(0, len(curve), off_curve)]
            g1 = np.unique(np.concatenate([curve, base + shifts]), axis=0)
        else:
            g1 = curve
        L_direct = kernel_L(g1, k, tau, d)
        scales1 = params.noncentral_scales(k)
        phi1 = phi_cutoff(g1, scales1, width_n, tau)
        results = {}
        L_cache: dict[int, dict] = {}
        for s_ in s_values:
            Q = params.Q(s_)
            if Q not in L_cache:
                low = RationalSet.fixed_denominator(d, Q)
                sets = {"low": low}
                for t in params.t_range(k):
                    sets[f"t={t}"] = RationalSet.farey(d, t, tau) - low
                sets["union"] = low | RationalSet.farey_upto(d, width_n, tau)
                ints = _noncentral_integrals(g1, sets, k, width_n, tau, d, (n, wts))
                pieces = {name: phi1 * v for name, v in ints.items() if name != "union"}
                # the complement carries the part of L_k that phi_k^(1) cuts off
                pieces["c"] = phi1 * (L_direct - ints["union"]) + (1 - phi1) * L_direct
                L_cache[Q] = {"pieces": pieces, "margin": disjointness_margin(sets["union"], scales1, width_n, tau)}
            pieces = L_cache[Q]["pieces"]
            Nks = _central_pieces(params, k, g2, route, {"N": RationalSet.farey(dp, s_, tau)},
                                  RationalSet.farey(dp, s_, tau), width_c)["N"]
            comps = {}
            for name, Lp in pieces.items():
                label = {"low": f"G^low_{k},{s_}", "c": f"G^c_{k},{s_}"}.get(name)
                if label is None:
                    label = f"G_{k},{s_},{name.split('=')[1]}"
                comps[label] = _product_kernel(d, g1, Lp, g2, Nks)
            source = _product_kernel(d, g1, L_direct, g2, Nks)
            probes = np.concatenate([np.repeat(g1, len(g2), 0), np.tile(g2, (len(g1), 1))], axis=1)
            results[s_] = Decomposition(mode, params, source, comps, probes, {
                "s": s_, "Q": Q, "route": route,
                "noncentral_disjointness_margin": L_cache[Q]["margin"],
                "phi_defect": float(np.max((1 - phi1) * np.abs(L_direct))),
            })
        return results[s] if s is not None else results

    if mode == "generalized":
        if A is None or B is None or w is None:
            raise ValueError("generalized mode needs A, B and w")
        if A.m != d or B.m != dp:
            raise ValueError("A must live in dimension d and B in dimension d'")
        width_c = params.delta * w if params.central_width is None else params.central_width
        width_n = params.delta_p * w if params.noncentral_width is None else params.noncentral_width
        weights = moment_weights(k, tau, iota)
        g1 = _powers(weights[0], d)
        scales1 = params.noncentral_scales(k)
        phi1 = phi_cutoff(g1, scales1, params.width_noncentral(k), tau)
        Lv = phi1 * _noncentral_integrals(g1, {"A": A}, k, width_n, tau, d, weights)["A"]
        scales2 = params.central_scales(k)
        phi2 = phi_cutoff(g2, scales2, params.width_central(k), tau)
        Nv = phi2 * _central_integral(g2, B, scales2, width_c, tau)
        name = f"K{'′' if iota else ''}_{k},{w}"
        comp = _product_kernel(d, g1, Lv, g2, Nv)
        probes = np.concatenate([np.repeat(g1, len(g2), 0), np.tile(g2, (len(g1), 1))], axis=1)
        return Decomposition(mode, params, comp, {name: comp}, probes, {"w": w, "iota": iota})

    raise ValueError(f"unknown mode {mode!r}")


def generalized_difference(params: DecompositionParams, A: RationalSet, B: RationalSet, w: int,
                           central_radius: int = 2) -> SparseFunction:
    """K' built as (kernel with S_{k+1}) - (kernel with S_k), multipliers and phi frozen at k."""
    k, tau, d = params.k, params.tau, params.d
    dp = params.shape.d_prime
    n, _ = moment_weights(k, tau, 1)
    g1 = _powers(n, d)
    width_c = params.delta * w if params.central_width is None else params.central_width
    width_n = params.delta_p * w if params.noncentral_width is None else params.noncentral_width
    phi1 = phi_cutoff(g1, params.noncentral_scales(k), params.width_noncentral(k), tau)
    hi = _noncentral_integrals(g1, {"A": A}, k, width_n, tau, d, moment_weights(k + 1, tau))["A"]
    lo = _noncentral_integrals(g1, {"A": A}, k, width_n, tau, d, moment_weights(k, tau))["A"]
    g2 = _central_window(dp, central_radius)
    scales2 = params.central_scales(k)
    Nv = phi_cutoff(g2, scales2, params.width_central(k), tau) * _central_integral(g2, B, scales2, width_c, tau)
    return _product_kernel(d, g1, phi1 * (hi - lo), g2, Nv)

"""Classical and nilpotent exponential sums, complete sums at rationals, oscillatory profiles.

Phases at rational points are reduced mod q in integer arithmetic before a
single complex exponential is taken, so long sums do not accumulate float
phase drift.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .cutoffs import chi, chi_prime
from .group import inv_arrays, mul_arrays, shape as make_shape
from .rationals import RationalVector

__all__ = [
    "PhasePoint",
    "QuadratureError",
    "weyl_sum",
    "gauss_sum_complete",
    "gauss_sums_all",
    "nil_weyl_sum",
    "nil_gauss_sum",
    "nil_gauss_sums_batch",
    "nil_gauss_table",
    "continuous_profile_J",
    "oscillatory_P",
    "decay_fit",
    "sharp_weights",
    "smooth_weights",
]

BRUTE_LIMIT = 10**8


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class PhasePoint:
    """Real phase vector indexed by Y_d (or by 1..d for classical sums)."""

    theta: tuple

    def __post_init__(self):
        vals = tuple(float(t) for t in self.theta)
        if not all(math.isfinite(t) for t in vals):
            raise ValueError("phase entries must be finite")
        object.__setattr__(self, "theta", vals)

    def as_array(self) -> np.ndarray:
        return np.array(self.theta)


def _roots(q: int) -> np.ndarray:
    """exp(-2 pi i j / q), j = 0..q-1."""
    return np.exp(-2j * np.pi * np.arange(q) / q)


def sharp_weights(P: float) -> Callable[[np.ndarray], np.ndarray]:
    """Indicator of the window |n| <= 2P."""
    return lambda n: (np.abs(n) <= 2 * P).astype(float)


def smooth_weights(P: float) -> Callable[[np.ndarray], np.ndarray]:
    """n -> chi(n / P)."""
    return lambda n: chi(np.asarray(n) / P)


# ---------------------------------------------------------------------------
# classical sums

def weyl_sum(weights: Callable | None, P: float, theta) -> complex:
    """sum_{|n| <= 2P} phi(n) e(-(theta_1 n + ... + theta_d n^d)).

    ``theta`` may be real, or a RationalVector, in which case the phase is
    reduced mod q exactly.
    """
    if P < 1:
        raise ValueError(f"P must be >= 1, got {P}")
    weights = smooth_weights(P) if weights is None else weights
    R = math.floor(2 * P)
    n = np.arange(-R, R + 1, dtype=np.int64)
    phi = np.asarray(weights(n), dtype=complex)
    if isinstance(theta, RationalVector):
        q = theta.denominator
        res = np.zeros(n.size, dtype=np.int64)
        nm = n % q
        pw = np.ones(n.size, dtype=np.int64)
        for a in theta.numerators:
            pw = pw * nm % q
            res = (res + a * pw) % q
        return complex(np.sum(phi * _roots(q)[res]))
    theta = np.asarray(theta, dtype=float)
    phase = np.zeros(n.size)
    nf = n.astype(float)
    for l, t in enumerate(theta, start=1):
        phase = np.mod(phase + np.mod(t * nf**l, 1.0), 1.0)
    return complex(np.sum(phi * np.exp(-2j * np.pi * phase)))


def _power_residues(q: int, d: int) -> np.ndarray:
    """Table [n^l mod q] for n in Z_q, l = 1..d, shape (q, d)."""
    n = np.arange(q, dtype=np.int64)
    out = np.empty((q, d), dtype=np.int64)
    pw = np.ones(q, dtype=np.int64)
    for l in range(d):
        pw = pw * n % q
        out[:, l] = pw
    return out


def gauss_sum_complete(a: RationalVector | Sequence[int], q: int | None = None) -> complex:
    """S(a/q) = q^-1 sum_{n mod q} e(-(a_1 n + ... + a_d n^d) / q)."""
    if not isinstance(a, RationalVector):
        if q is None:
            raise ValueError("pass a RationalVector or numerators with q")
        if q < 1:
            raise ValueError(f"q must be >= 1, got {q}")
        a = RationalVector(tuple(a), q)
    q = a.denominator
    P = _power_residues(q, a.dim)
    res = P @ np.array(a.numerators, dtype=np.int64) % q
    return complex(_roots(q)[res].mean())


def gauss_sums_all(q: int, d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """S(a/q) for every a in Z_q^d.

    Returns (numerators, values, reduced_mask) with numerators of shape (q^d, d).
    """
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    P = _power_residues(q, d)
    A = np.array(list(itertools.product(range(q), repeat=d)), dtype=np.int64).reshape(-1, d)
    roots = _roots(q)
    vals = np.empty(len(A), dtype=complex)
    for start in range(0, len(A), 4096):
        res = A[start:start + 4096] @ P.T % q
        vals[start:start + 4096] = roots[res].mean(axis=1)
    g = np.gcd.reduce(np.concatenate([A, np.full((len(A), 1), q)], axis=1), axis=1)
    return A, vals, g == 1


# ---------------------------------------------------------------------------
# nilpotent sums

def _step_data(v: int, w: int, d: int, variant: str):
    """Increments u_l, diagonal terms, for one letter pair of D (v inverted) or D~."""
    if variant in ("D", "G"):
        u = [w**l - v**l for l in range(1, d + 1)]
        diag = {(l1, l2): v ** (l1 + l2) - v**l1 * w**l2 for l1 in range(2, d + 1) for l2 in range(1, l1)}
    elif variant in ("Dt", "Gt"):
        u = [v**l - w**l for l in range(1, d + 1)]
        diag = {(l1, l2): w ** (l1 + l2) - v**l1 * w**l2 for l1 in range(2, d + 1) for l2 in range(1, l1)}
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return u, diag


def _word_arrays(xs: np.ndarray, ys: np.ndarray, d: int, variant: str) -> np.ndarray:
    """Rows of the alternating words, multiplied out with the group law."""
    from .sparse import moment_curve_rows

    size = make_shape(d).size
    out = np.zeros((xs.shape[0], size), dtype=np.int64)
    for j in range(xs.shape[1]):
        a = moment_curve_rows(xs[:, j], d)
        b = moment_curve_rows(ys[:, j], d)
        if variant in ("D", "G"):
            out = mul_arrays(mul_arrays(out, inv_arrays(a, d), d), b, d)
        else:
            out = mul_arrays(mul_arrays(out, a, d), inv_arrays(b, d), d)
    return out


def nil_weyl_sum(
    P: float,
    r: int,
    theta,
    variant: str = "D",
    phi: Callable | None = None,
    psi: Callable | None = None,
    d: int | None = None,
    method: str = "auto",
) -> complex:
    """sum over n, m in Z^r of e(-D(n, m) . theta) prod_j phi(n_j) psi(m_j), |n_j|, |m_j| <= 2P.

    method="brute" enumerates all (4P+1)^(2r) tuples and multiplies the words
    out; "dp" carries the exact integer prefix sums of the increments as a
    state; "auto" uses brute for r=1 and dp otherwise.
    """
    if P < 1 or r < 1:
        raise ValueError("need P >= 1 and r >= 1")
    theta = theta.as_array() if isinstance(theta, PhasePoint) else np.asarray(theta, dtype=float)
    if d is None:
        d = int(round((math.isqrt(8 * theta.size + 1) - 1) / 2))
    sh = make_shape(d)
    if theta.size != sh.size:
        raise ValueError(f"theta must have {sh.size} entries for d={d}")
    phi = sharp_weights(P) if phi is None else phi
    psi = sharp_weights(P) if psi is None else psi
    R = math.floor(2 * P)
    window = np.arange(-R, R + 1, dtype=np.int64)
    pw = np.asarray(phi(window), dtype=complex)
    sw = np.asarray(psi(window), dtype=complex)
    if method == "auto":
        method = "brute" if r == 1 else "dp"
    if method == "brute":
        if window.size ** (2 * r) > BRUTE_LIMIT:
            raise ValueError("brute-force enumeration too large; use method='dp'")
        idx = np.array(list(itertools.product(range(window.size), repeat=2 * r)), dtype=np.int64)
        xs, ys = window[idx[:, :r]], window[idx[:, r:]]
        words = _word_arrays(xs, ys, d, variant).astype(float)
        phase = np.mod(words @ theta, 1.0)
        wts = np.prod(pw[idx[:, :r]], axis=1) * np.prod(sw[idx[:, r:]], axis=1)
        return complex(np.sum(wts * np.exp(-2j * np.pi * phase)))
    if method != "dp":
        raise ValueError(f"unknown method {method!r}")
    pos = {idx: i for i, idx in enumerate(sh.index_set)}
    steps = []
    for i, v in enumerate(window.tolist()):
        for j, w in enumerate(window.tolist()):
            wt = pw[i] * sw[j]
            if wt == 0:
                continue
            u, diag = _step_data(v, w, d, variant)
            base = sum(theta[pos[(l, 0)]] * u[l - 1] for l in range(1, d + 1))
            base += sum(theta[pos[key]] * val for key, val in diag.items())
            steps.append((wt, tuple(u[1:]), base, u))
    # state: exact prefix sums of u_l for l = 2..d
    state = {tuple([0] * (d - 1)): 1.0 + 0j}
    central = [(l1, l2) for l1, l2 in sh.central_indices]
    for _ in range(r):
        nxt: dict = {}
        for p, amp in state.items():
            for wt, incr, base, u in steps:
                cross = sum(theta[pos[(l1, l2)]] * p[l1 - 2] * u[l2 - 1] for l1, l2 in central)
                key = tuple(a + b for a, b in zip(p, incr))
                val = amp * wt * np.exp(-2j * np.pi * math.fmod(base + cross, 1.0))
                nxt[key] = nxt.get(key, 0) + val
        state = nxt
    return complex(sum(state.values()))


def _theta_numerators(a, d: int) -> tuple[np.ndarray, int]:
    if isinstance(a, RationalVector):
        return np.array(a.numerators, dtype=np.int64), a.denominator
    raise TypeError("nilpotent Gauss sums take a RationalVector indexed by Y_d")


def nil_gauss_sums_batch(A: np.ndarray, q: int, r: int, d: int, variant: str = "G") -> np.ndarray:
    """q^-2r sum_{v, w in Z_q^r} e(-D(v, w) . a / q) for every row a of A (prefix-residue DP).

    State: residues mod q of the prefix sums of the increments of degree l = 2..d.
    Cost O(r q^(d+1)) per row.
    """
    A = np.atleast_2d(np.asarray(A, dtype=np.int64)) % q
    sh = make_shape(d)
    nA = A.shape[0]
    pos = {idx: i for i, idx in enumerate(sh.index_set)}
    roots = _roots(q)
    state_shape = (q,) * (d - 1)
    amp = np.zeros((nA,) + state_shape, dtype=complex)
    amp[(slice(None),) + (0,) * (d - 1)] = 1.0
    grids = np.indices(state_shape).reshape(d - 1, -1) if d > 1 else np.zeros((0, 1), dtype=np.int64)
    central = list(sh.central_indices)
    trans = []
    for v in range(q):
        for w in range(q):
            u, diag = _step_data(v, w, d, variant)
            u = [x % q for x in u]
            base = np.zeros(nA, dtype=np.int64)
            for l in range(1, d + 1):
                base += A[:, pos[(l, 0)]] * u[l - 1]
            for key, val in diag.items():
                base += A[:, pos[key]] * (val % q)
            # coefficient of the prefix p_{l1} in the cross term
            coef = np.zeros((nA, max(d - 1, 1)), dtype=np.int64)
            for l1, l2 in central:
                coef[:, l1 - 2] += A[:, pos[(l1, l2)]] * u[l2 - 1]
            trans.append((base % q, coef % q, tuple(u[1:])))
    for _ in range(r):
        new = np.zeros_like(amp)
        flat = amp.reshape(nA, -1)
        for base, coef, shift in trans:
            if d > 1:
                res = (base[:, None] + coef[:, : d - 1] @ grids) % q
            else:
                res = base[:, None]
            contrib = (flat * roots[res]).reshape(amp.shape)
            if d > 1:
                contrib = np.roll(contrib, shift, axis=tuple(range(1, d)))
            new += contrib
        amp = new
    return amp.reshape(nA, -1).sum(axis=1) / float(q) ** (2 * r)


def nil_gauss_sum(a: RationalVector, r: int = 1, variant: str = "G", method: str = "dp",
                  d: int | None = None) -> complex:
    """G(a/q) (variant "G") or G~(a/q) ("Gt") for a reduced a/q indexed by Y_d."""
    if r < 1:
        raise ValueError("r must be >= 1")
    nums, q = _theta_numerators(a, d)
    if d is None:
        d = int(round((math.isqrt(8 * nums.size + 1) - 1) / 2))
    if make_shape(d).size != nums.size:
        raise ValueError(f"need {make_shape(d).size} numerators for d={d}")
    if method == "dp":
        return complex(nil_gauss_sums_batch(nums[None, :], q, r, d, variant)[0])
    if method == "brute":
        if q ** (2 * r) > BRUTE_LIMIT:
            raise ValueError(f"brute force over q^(2r) = {q ** (2 * r)} tuples refused; use method='dp'")
        return complex(_nil_gauss_brute(nums[None, :], q, r, d, variant)[0])
    raise ValueError(f"unknown method {method!r}")


def _nil_gauss_brute(A: np.ndarray, q: int, r: int, d: int, variant: str, chunk: int = 1 << 16) -> np.ndarray:
    """Oracle: multiply out every word in Z_q^(2r) with the group law."""
    A = np.atleast_2d(A) % q
    total = np.zeros(A.shape[0], dtype=complex)
    roots = _roots(q)
    it = itertools.product(range(q), repeat=2 * r)
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            break
        idx = np.array(block, dtype=np.int64)
        words = _word_arrays(idx[:, :r], idx[:, r:], d, variant) % q
        res = (words @ A.T) % q
        total += roots[res].sum(axis=0)
    return total / float(q) ** (2 * r)


def nil_gauss_table(q: int, r: int, d: int = 2, variant: str = "G") -> np.ndarray:
    """G(a/q) for every a in Z_q^{|Y_d|}, returned as an array indexed by a.

    The distribution of D(v, w) mod q over (Z_q^r)^2 is built by a DP over
    (prefix residues, accumulated word residue), then one FFT gives all a.
    """
    sh = make_shape(d)
    size = sh.size
    pos = {idx: i for i, idx in enumerate(sh.index_set)}
    nstate = d - 1
    # hist over (prefix residues..., word residues...)
    hist = np.zeros((q,) * (nstate + size))
    hist[(0,) * (nstate + size)] = 1.0
    central = list(sh.central_indices)
    pref_axes = tuple(range(nstate))
    for _ in range(r):
        new = np.zeros_like(hist)
        for v in range(q):
            for w in range(q):
                u, diag = _step_data(v, w, d, variant)
                shift = [0] * size
                for l in range(1, d + 1):
                    shift[pos[(l, 0)]] = u[l - 1] % q
                for key, val in diag.items():
                    shift[pos[key]] = val % q
                moved = np.roll(hist, shift, axis=tuple(range(nstate, nstate + size)))
                # cross terms p_{l1} u_{l2} depend on the prefix: shear along the word axes
                for l1, l2 in central:
                    c = u[l2 - 1] % q
                    if c == 0:
                        continue
                    ax = nstate + pos[(l1, l2)]
                    sheared = np.empty_like(moved)
                    for p in range(q):
                        sl = [slice(None)] * moved.ndim
                        sl[l1 - 2] = p
                        sheared[tuple(sl)] = np.roll(moved[tuple(sl)], p * c % q, axis=ax - 1)
                    moved = sheared
                new += np.roll(moved, [u[l - 1] % q for l in range(2, d + 1)], axis=pref_axes) if nstate else moved
        hist = new
    counts = hist.sum(axis=pref_axes) if nstate else hist
    return np.fft.fftn(counts) / float(q) ** (2 * r)


# ---------------------------------------------------------------------------
# oscillatory integrals

def continuous_profile_J(xi, iota: int = 0, tau: float = 2.0, k: int = 0, epsabs: float = 1e-8) -> complex:
    """J(xi) = int chi^iota(y) e(-A0(y) . (tau^k o xi)) dy by adaptive quadrature."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    d = xi.size
    scaled = xi * np.array([tau ** (k * l) for l in range(1, d + 1)])
    cut = (lambda y: chi_prime(y, tau)) if iota else chi
    lim = 2 * tau if iota else 2.0

    def phase(y):
        return 2 * np.pi * sum(scaled[l - 1] * y**l for l in range(1, d + 1))

    freq = float(np.abs(scaled).sum() * max(1.0, lim) ** d)
    limit = max(200, int(20 * freq) + 50)
    parts = []
    for fn in (np.cos, np.sin):
        val, err, *info = integrate.quad(lambda y: float(cut(y)) * fn(phase(y)), -lim, lim,
                                         epsabs=epsabs, epsrel=0, limit=limit, full_output=1)
        if err > 10 * epsabs and len(info) > 1:
            raise QuadratureError(f"quadrature did not converge (error estimate {err:.2e})")
        parts.append(val)
    return complex(parts[0], -parts[1])


def _segment_nodes(tau: float, iota: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes, with breaks where the cutoff changes regime."""
    breaks = [1.0, 2.0] + ([tau, 2 * tau] if iota else [])
    pts = sorted(set(breaks) | {-b for b in breaks})
    g, w = np.polynomial.legendre.leggauss(n)
    xs, ws = [], []
    for a, b in zip(pts[:-1], pts[1:]):
        if b > a:
            xs.append((a + b) / 2 + (b - a) / 2 * g)
            ws.append((b - a) / 2 * w)
    return np.concatenate(xs), np.concatenate(ws)


def oscillatory_P(zeta, r: int = 1, iota: int = 0, variant: str = "P", tau: float = 2.0,
                  tol: float = 1e-8, max_nodes: int | None = None) -> complex:
    """int int prod_j chi^iota(w_j) chi^iota(y_j) e(-zeta . D(w, y)) dw dy (D~ for variant "Pt").

    Tensor composite Gauss-Legendre rule, split where the cutoff switches
    between constant and transition regimes; the node count grows until two
    successive values agree to ``tol``.
    """
    if r > 2:
        raise ValueError("tensor quadrature is limited to r <= 2")
    if variant not in ("P", "Pt"):
        raise ValueError(f"unknown variant {variant!r}")
    zeta = zeta.as_array() if isinstance(zeta, PhasePoint) else np.asarray(zeta, dtype=float)
    d = int(round((math.isqrt(8 * zeta.size + 1) - 1) / 2))
    sh = make_shape(d)
    if zeta.size != sh.size:
        raise ValueError("zeta must be indexed by Y_d")
    cut = (lambda y: chi_prime(y, tau)) if iota else chi
    if max_nodes is None:
        max_nodes = 1024 if r == 1 else 48
    wvar = "D" if variant == "P" else "Dt"
    prev, last_gap = None, None
    n = 16
    while n <= max_nodes:
        y, h = _segment_nodes(tau, iota, n)
        c = cut(y) * h
        keep = c != 0
        y, c = y[keep], c[keep]
        val = _tensor_sum(y, c, zeta, r, d, wvar)
        if prev is not None:
            gap = abs(val - prev)
            # geometric convergence: the newest value is off by about gap^2 / last_gap
            err = gap if last_gap is None else gap * min(1.0, gap / max(last_gap, 1e-300))
            if err < tol:
                return val
            last_gap = gap
        prev, n = val, (n * 3) // 2
    raise QuadratureError(f"tensor quadrature did not reach tol={tol} with {max_nodes} nodes per axis")


def _real_word(xs: list[np.ndarray], ys: list[np.ndarray], d: int, variant: str) -> list[np.ndarray]:
    """Closed-form D / D~ coordinates for broadcast real arrays (same formula as group.d_form)."""
    sh = make_shape(d)
    sign = 1 if variant == "D" else -1
    incr = [[sign * (y**l - x**l) for l in range(1, d + 1)] for x, y in zip(xs, ys)]
    coords = [sum(u[l - 1] for u in incr) for l in range(1, d + 1)]
    for l1, l2 in sh.central_indices:
        cross, prefix = 0.0, 0.0
        for u in incr:
            cross = cross + prefix * u[l2 - 1]
            prefix = prefix + u[l1 - 1]
        if variant == "D":
            diag = sum(x ** (l1 + l2) - x**l1 * y**l2 for x, y in zip(xs, ys))
        else:
            diag = sum(y ** (l1 + l2) - x**l1 * y**l2 for x, y in zip(xs, ys))
        coords.append(cross + diag)
    return coords


def _tensor_sum(y: np.ndarray, c: np.ndarray, zeta: np.ndarray, r: int, d: int, variant: str) -> complex:
    if r == 1:
        X, Y = np.meshgrid(y, y, indexing="ij")
        W = np.outer(c, c)
        D = _real_word([X], [Y], d, variant)
        phase = sum(z * comp for z, comp in zip(zeta, D))
        return complex(np.sum(W * np.exp(-2j * np.pi * phase)))
    # r = 2: the only coupling between the two letter pairs is the cross term
    # sum zeta_{l1 l2} u_1^(l1) u_2^(l2), bilinear in the increments
    sh = make_shape(d)
    X, Y = (a.ravel() for a in np.meshgrid(y, y, indexing="ij"))
    W = np.outer(c, c).ravel()
    sign = 1 if variant == "D" else -1
    u = np.stack([sign * (Y**l - X**l) for l in range(1, d + 1)], axis=1)
    single = _real_word([X], [Y], d, variant)
    own = W * np.exp(-2j * np.pi * sum(z * comp for z, comp in zip(zeta, single)))
    if sh.d_prime == 0:
        return complex(own.sum() ** 2)
    pos = {idx: i for i, idx in enumerate(sh.index_set)}
    left = np.zeros((X.size, sh.d_prime))
    right = np.zeros((X.size, sh.d_prime))
    for i, (l1, l2) in enumerate(sh.central_indices):
        left[:, i] = zeta[pos[(l1, l2)]] * u[:, l1 - 1]
        right[:, i] = u[:, l2 - 1]
    total = 0j
    for start in range(0, X.size, 1024):
        cross = left[start:start + 1024] @ right.T
        total += own[start:start + 1024] @ (np.exp(-2j * np.pi * cross) @ own)
    return complex(total)


# ---------------------------------------------------------------------------
# decay fits

def decay_fit(values: Sequence[tuple[float, float]]) -> tuple[float, float, float]:
    """Least-squares line through (log x, log y): returns (slope, intercept, rms residual)."""
    pts = np.asarray(values, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 2:
        raise ValueError("need at least three (x, value) pairs")
    if np.any(pts <= 0):
        raise ValueError("decay_fit needs positive x and values")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    if np.ptp(lx) == 0:
        raise ValueError("all x values coincide")
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid**2)))

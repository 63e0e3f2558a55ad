"""Anisotropic quasi-norm on G0#(d), its balls in H_Q, and the shifted maximal function.

q_beta(x) = max over Y_d of (beta_{l1 l2} |x_{l1 l2}|)^(1/(l1+l2)).  Ball
membership q_beta(x . y^-1) < r splits into a box condition on the
non-central part and, for each fixed non-central part, an interval condition
on every central coordinate, so balls are counted exactly without listing
central coordinates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .group import GroupElement, mul_arrays, inv_arrays, shape as make_shape
from .sparse import SparseFunction

__all__ = [
    "QuasiGeometry",
    "quasi_norm",
    "ball_count",
    "ball_points",
    "comparability_ratio",
    "admissible_scales",
    "shifted_maximal",
    "weak_type_ratio",
    "EnumerationOverflow",
]

ENUM_LIMIT = 5_000_000


class EnumerationOverflow(ValueError):
    """The lattice window needed for an exact count is too large."""


@dataclass(frozen=True)
class QuasiGeometry:
    """Weights beta over Y_d and the lattice modulus Q.

    ``from_scale`` sets beta = 2^floor(delta w) on central and
    2^floor(delta' w) on non-central coordinates.
    """

    d: int
    beta: tuple
    Q: int = 1
    w: int = 0

    def __post_init__(self):
        sh = make_shape(self.d)
        beta = tuple(float(b) for b in self.beta)
        if len(beta) != sh.size:
            raise ValueError(f"beta needs {sh.size} entries for d={self.d}")
        if min(beta) < 1:
            raise ValueError("weights must be >= 1")
        if max(beta[sh.d:], default=1.0) > min(beta[: sh.d]):
            raise ValueError("central weights may not exceed non-central ones")
        if self.Q < 1:
            raise ValueError("Q must be positive")
        object.__setattr__(self, "beta", beta)

    @classmethod
    def uniform(cls, d: int, Q: int = 1) -> "QuasiGeometry":
        return cls(d, (1.0,) * make_shape(d).size, Q)

    @classmethod
    def from_scale(cls, d: int, w: int, Q: int = 1, delta: float = 0.4, delta_p: float = 0.6) -> "QuasiGeometry":
        sh = make_shape(d)
        nc = 2.0 ** math.floor(delta_p * w)
        c = 2.0 ** math.floor(delta * w)
        return cls(d, (nc,) * sh.d + (c,) * sh.d_prime, Q, w)

    @property
    def shape(self):
        return make_shape(self.d)

    @property
    def degrees(self) -> np.ndarray:
        return self.shape.degrees

    def volume(self, r: float) -> float:
        """prod over Y_d of r^(l1+l2) / (Q beta)."""
        return float(np.prod([r**deg / (self.Q * b) for deg, b in zip(self.degrees, self.beta)]))


def quasi_norm(geom: QuasiGeometry, x) -> np.ndarray | float:
    """q_beta of one element (GroupElement or coordinates) or of every row of an array."""
    arr = np.asarray(x.coords if isinstance(x, GroupElement) else x, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[1] != geom.shape.size:
        raise ValueError(f"expected {geom.shape.size} coordinates")
    vals = (np.asarray(geom.beta) * np.abs(arr)) ** (1.0 / geom.degrees)
    out = vals.max(axis=1)
    return float(out[0]) if single else out


def _strict_multiples(lo: np.ndarray, hi: np.ndarray, Q: int) -> np.ndarray:
    """Number of integers m with lo < m Q < hi."""
    a = np.floor(lo / Q) + 1
    b = np.ceil(hi / Q) - 1
    return np.maximum(b - a + 1, 0).astype(np.int64)


def _noncentral_box(geom: QuasiGeometry, center1: np.ndarray, r: float, limit: int) -> np.ndarray:
    """Rows y1 in (QZ)^d with beta_l |c_l - y_l| < r^l."""
    axes = []
    total = 1
    for l in range(1, geom.d + 1):
        half = r**l / geom.beta[l - 1]
        c = center1[l - 1]
        lo = math.floor((c - half) / geom.Q) + 1
        hi = math.ceil((c + half) / geom.Q) - 1
        ax = np.arange(lo, hi + 1, dtype=np.int64) * geom.Q
        ax = ax[np.abs(c - ax) * geom.beta[l - 1] < r**l]
        axes.append(ax)
        total *= ax.size
        if total > limit:
            raise EnumerationOverflow(f"non-central window has more than {limit} points")
    if total == 0:
        return np.zeros((0, geom.d), dtype=np.int64)
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, geom.d)


def _central_offsets(geom: QuasiGeometry, center: np.ndarray, y1: np.ndarray, side: str) -> np.ndarray:
    """Central part of c . (y1, 0)^-1 (side="left") or (y1, 0) . c^-1 (side="right")."""
    sh = geom.shape
    y = np.zeros((len(y1), sh.size))
    y[:, : sh.d] = y1
    c = np.broadcast_to(np.asarray(center, dtype=float), y.shape)
    prod = mul_arrays(c, inv_arrays(y, sh.d), sh.d) if side == "left" else mul_arrays(y, inv_arrays(c, sh.d), sh.d)
    return prod[:, sh.d:]


def ball_count(geom: QuasiGeometry, center, r: float, limit: int = ENUM_LIMIT) -> int:
    """#{y in H_Q : q_beta(x . y^-1) < r}.

    With x . y^-1 = (x1 - y1, x2 - y2 + R0(y1 - x1, y1)), each central
    coordinate of y must lie in an open interval fixed by y1.
    """
    if r <= 0:
        raise ValueError("radius must be positive")
    sh = geom.shape
    x = np.asarray(center.coords if isinstance(center, GroupElement) else center, dtype=float)
    y1 = _noncentral_box(geom, x[: sh.d], r, limit)
    if not len(y1):
        return 0
    if sh.d_prime == 0:
        return len(y1)
    off = _central_offsets(geom, x, y1, "left")  # = x2 + R0(y1 - x1, y1); y2 enters with a minus sign
    half = np.array([r**deg / b for deg, b in zip(sh.degrees[sh.d:], geom.beta[sh.d:])])
    counts = _strict_multiples(off - half, off + half, geom.Q)
    return int(np.sum(np.prod(counts, axis=1)))


def ball_points(geom: QuasiGeometry, center, r: float, side: str = "left", shift=None,
                limit: int = ENUM_LIMIT) -> np.ndarray:
    """Every y in H_Q with q_beta(x . y^-1 - s) < r (side="left") or q_beta(y . x^-1 - s) < r ("right").

    ``shift`` s is a real vector over Y_d (default 0).
    """
    sh = geom.shape
    x = np.asarray(center.coords if isinstance(center, GroupElement) else center, dtype=float)
    s = np.zeros(sh.size) if shift is None else np.asarray(shift, dtype=float)
    sign = 1.0 if side == "left" else -1.0
    # non-central: |x1 - y1 - s1| (left) or |y1 - x1 - s1| (right); either way y1 is near x1 -/+ s1
    y1 = _noncentral_box(geom, x[: sh.d] - sign * s[: sh.d], r, limit)
    if not len(y1):
        return np.zeros((0, sh.size), dtype=np.int64)
    if sh.d_prime == 0:
        return y1
    off = _central_offsets(geom, x, y1, side) - s[sh.d:]
    half = np.array([r**deg / b for deg, b in zip(sh.degrees[sh.d:], geom.beta[sh.d:])])
    # left: |off - y2| < half; right: |off + y2| < half
    centre2 = off if side == "left" else -off
    lo = np.floor((centre2 - half) / geom.Q) + 1
    hi = np.ceil((centre2 + half) / geom.Q) - 1
    counts = np.maximum(hi - lo + 1, 0).astype(np.int64)
    if int(np.sum(np.prod(counts, axis=1))) > limit:
        raise EnumerationOverflow(f"ball has more than {limit} points")
    rows = []
    for i in np.flatnonzero(np.prod(counts, axis=1)):
        ranges = [np.arange(lo[i, j], hi[i, j] + 1, dtype=np.int64) * geom.Q for j in range(sh.d_prime)]
        grid = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, sh.d_prime)
        rows.append(np.hstack([np.broadcast_to(y1[i], (len(grid), sh.d)), grid]))
    return np.vstack(rows) if rows else np.zeros((0, sh.size), dtype=np.int64)


def comparability_ratio(geom: QuasiGeometry, r: float, center=None) -> float:
    """|B(x, r) in H_Q| / prod r^(l1+l2) / (Q beta)."""
    center = np.zeros(geom.shape.size) if center is None else center
    return ball_count(geom, center, r) / geom.volume(r)


def admissible_scales(geom: QuasiGeometry, ks: Sequence[int]) -> list[int]:
    """The k with 2^(k/2) >= 8 Q 2^(w/8)."""
    return [k for k in ks if 2 ** (k / 2) >= 8 * geom.Q * 2 ** (geom.w / 8)]


def _shift(geom: QuasiGeometry, k: int, u: float) -> np.ndarray:
    s = np.zeros(geom.shape.size)
    s[: geom.d] = [(2.0**k * u) ** l for l in range(1, geom.d + 1)]
    return s


def shifted_maximal(geom: QuasiGeometry, f: SparseFunction, u: float, ks: Sequence[int],
                    points: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """M f(h) = sup_k c_k sum_{y in H_Q : q(h . y^-1 - A0(2^k u)) < 2^k} |f(y)|, c_k = prod Q beta 2^(-k(l1+l2)).

    The sup runs over the admissible k among ``ks``.  With ``points=None`` the
    output covers every h where M f can be nonzero.  Returns (points, values).
    """
    if not -2 <= u <= 2:
        raise ValueError("u must lie in [-2, 2]")
    ks = admissible_scales(geom, ks)
    if not ks:
        raise ValueError("no admissible scale k in the given windows")
    ys, vals = f.arrays()
    if len(ys) and np.any(ys % geom.Q):
        raise ValueError(f"f must be supported in H_Q (multiples of {geom.Q})")
    absf = np.abs(vals)
    if points is None:
        cand = [ball_points(geom, y, 2.0**k, side="right", shift=_shift(geom, k, u)) for k in ks for y in ys]
        cand = [c for c in cand if len(c)]
        points = np.unique(np.vstack(cand), axis=0) if cand else np.zeros((0, geom.shape.size), dtype=np.int64)
    points = np.atleast_2d(np.asarray(points, dtype=np.int64))
    out = np.zeros(len(points))
    sh = geom.shape
    for k in ks:
        norm = float(np.prod([geom.Q * b * 2.0 ** (-k * deg) for deg, b in zip(sh.degrees, geom.beta)]))
        s = _shift(geom, k, u)
        acc = np.zeros(len(points))
        for y, a in zip(ys, absf):
            diff = mul_arrays(points.astype(float), inv_arrays(y[None, :].astype(float), sh.d), sh.d) - s
            acc += a * (quasi_norm(geom, diff) < 2.0**k)
        out = np.maximum(out, norm * acc)
    return points, out


def weak_type_ratio(geom: QuasiGeometry, f: SparseFunction, u: float, ks: Sequence[int],
                    levels: Sequence[float] | None = None) -> float:
    """max over lambda of lambda |{M f >= lambda}| / ||f||_1 (counting measure on H_Q)."""
    _, mf = shifted_maximal(geom, f, u, ks)
    l1 = float(np.sum(np.abs(f.arrays()[1])))
    if l1 == 0:
        return 0.0
    levels = np.unique(mf[mf > 0]) if levels is None else np.asarray(levels, dtype=float)
    best = 0.0
    for lam in levels:
        best = max(best, lam * np.count_nonzero(mf >= lam) / l1)
    return best

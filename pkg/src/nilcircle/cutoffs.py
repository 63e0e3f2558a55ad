"""Smooth cutoffs eta_0, eta_j, eta_{<=A}, chi, chi' and their radial Fourier transforms.

eta_0(t) = S(2 - |t|), with S(u) = h(u) / (h(u) + h(1 - u)) and h(u) = exp(-1/u)
for u > 0 (0 otherwise).  It is even, C-infinity, equal to 1 on [-1, 1] and
supported in [-2, 2].  chi is taken equal to eta_0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import gamma, j0, j1, jv

__all__ = [
    "smooth_step",
    "eta0",
    "eta_j",
    "eta_leq",
    "chi",
    "chi_prime",
    "CutoffFunction",
    "cutoff_eval",
    "eta0_mass",
    "radial_fourier",
    "bump_fourier",
]


def smooth_step(u):
    u = np.asarray(u, dtype=float)
    pos = np.where(u > 0, u, 1.0)
    neg = np.where(u < 1, 1.0 - u, 1.0)
    hu = np.where(u > 0, np.exp(-1.0 / pos), 0.0)
    h1u = np.where(u < 1, np.exp(-1.0 / neg), 0.0)
    return hu / (hu + h1u)


def eta0(t):
    return smooth_step(2.0 - np.abs(np.asarray(t, dtype=float)))


def eta_j(t, j: int, tau: float = 2.0):
    """Annular piece: eta_0(tau^-j t) - eta_0(tau^(1-j) t) for j >= 1."""
    if j < 0:
        raise ValueError("j must be >= 0")
    t = np.asarray(t, dtype=float)
    if j == 0:
        return eta0(t)
    return eta0(tau ** (-j) * t) - eta0(tau ** (1 - j) * t)


def eta_leq(t, A: float, tau: float = 2.0, telescoped: bool = True):
    """Sum of eta_j over integers j in [0, A].

    The sum telescopes to eta_0(tau^-floor(A) t); ``telescoped=False`` adds
    the pieces one by one instead.
    """
    t = np.asarray(t, dtype=float)
    if A < 0:
        return np.zeros_like(t)
    J = math.floor(A)
    if telescoped:
        return eta0(tau ** (-J) * t)
    out = np.zeros_like(t)
    for j in range(J + 1):
        out = out + eta_j(t, j, tau)
    return out


def chi(t):
    return eta0(t)


def chi_prime(t, tau: float = 2.0):
    t = np.asarray(t, dtype=float)
    return chi(t / tau) / tau - chi(t)


def eta0_mass() -> float:
    """Integral of eta_0 over R; S(u) + S(1-u) = 1 makes it exactly 3."""
    return 3.0


@dataclass(frozen=True)
class CutoffFunction:
    """A named cutoff with its parameters; radial when fed vectors."""

    kind: str = "eta0"
    tau: float = 2.0
    j: int = 0
    A: float = 0.0

    KINDS = ("eta0", "eta_j", "eta_leq", "chi", "chi_prime")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown cutoff kind {self.kind!r}")
        if not (1.0 < self.tau <= 2.0) and self.kind != "eta0":
            raise ValueError(f"tau must lie in (1, 2], got {self.tau}")

    def __call__(self, t, radial: bool = False):
        t = np.asarray(t, dtype=float)
        if radial:
            t = np.sqrt(np.sum(t * t, axis=-1))
        if self.kind == "eta0":
            return eta0(t)
        if self.kind == "eta_j":
            return eta_j(t, self.j, self.tau)
        if self.kind == "eta_leq":
            return eta_leq(t, self.A, self.tau)
        if self.kind == "chi":
            return chi(t)
        return chi_prime(t, self.tau)

    @property
    def support_radius(self) -> float:
        if self.kind in ("eta0", "chi"):
            return 2.0
        if self.kind == "eta_j":
            return 2.0 * self.tau**self.j
        if self.kind == "eta_leq":
            return 2.0 * self.tau ** math.floor(self.A) if self.A >= 0 else 0.0
        return 2.0 * self.tau


def cutoff_eval(c: CutoffFunction, t, radial: bool = False):
    return c(t, radial=radial)


# ---------------------------------------------------------------------------
# Fourier transform of the radial bump x -> eta_0(|x|) on R^m

_RHO_MAX = 200.0
_RHO_STEP = 0.005


def _unit_ball_volume(m: int) -> float:
    return math.pi ** (m / 2) / gamma(m / 2 + 1)


def _bessel(nu: float, z):
    if nu == -0.5:
        return np.sqrt(2 / (np.pi * z)) * np.cos(z)
    if nu == 0.5:
        return np.sqrt(2 / (np.pi * z)) * np.sin(z)
    if nu == 0:
        return j0(z)
    if nu == 1:
        return j1(z)
    return jv(nu, z)


def _radial_fourier_direct(m: int, rho: np.ndarray, nodes: int = 1600) -> np.ndarray:
    """Hankel-transform evaluation, split at r = 1 where eta_0 stops being constant.

    F(rho) = 2 pi rho^-nu int_0^2 eta_0(r) J_nu(2 pi rho r) r^(nu+1) dr,  nu = m/2 - 1.
    The [0, 1] piece is J_{nu+1}(2 pi rho) / (2 pi rho) in closed form.
    """
    rho = np.asarray(rho, dtype=float)
    nu = m / 2 - 1
    x, w = np.polynomial.legendre.leggauss(nodes)
    r = 1.5 + 0.5 * x
    w = 0.5 * w
    prof = smooth_step(2.0 - r) * r ** (nu + 1)
    out = np.empty_like(rho)
    zero = rho == 0
    if np.any(zero):
        shell = m * _unit_ball_volume(m) * np.sum(w * smooth_step(2.0 - r) * r ** (m - 1))
        out[zero] = _unit_ball_volume(m) + shell
    idx = np.flatnonzero(~zero)
    rr = rho[idx]
    for start in range(0, rr.size, 2048):
        chunk = rr[start:start + 2048]
        z = 2 * np.pi * chunk
        tail = (_bessel(nu, np.outer(z, r)) * prof) @ w
        out[idx[start:start + 2048]] = 2 * np.pi * chunk ** (-nu) * (_bessel(nu + 1, z) / z + tail)
    return out


def _projection(m: int, x: np.ndarray, nodes: int = 160) -> np.ndarray:
    """Integral of eta_0(|(x, y)|) over y in R^(m-1), for |x| < 2."""
    x = np.abs(np.asarray(x, dtype=float))
    if m == 1:
        return eta0(x)
    sphere = (m - 1) * _unit_ball_volume(m - 1)
    s0 = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    s1 = np.sqrt(np.clip(4.0 - x * x, 0.0, None))
    g, w = np.polynomial.legendre.leggauss(nodes)
    half = 0.5 * (s1 - s0)
    s = (0.5 * (s1 + s0))[:, None] + half[:, None] * g[None, :]
    integrand = smooth_step(2.0 - np.sqrt(x[:, None] ** 2 + s * s)) * s ** (m - 2)
    outer = half * (integrand @ w)
    return sphere * (s0 ** (m - 1) / (m - 1) + outer)


@lru_cache(maxsize=None)
def _radial_table(m: int) -> CubicSpline:
    # projection-slice: the radial transform along an axis is the cosine
    # transform of the projection onto that axis
    g, w = np.polynomial.legendre.leggauss(1200)
    x = 1.0 + g
    w = w * _projection(m, x)
    grid = np.arange(0.0, _RHO_MAX + _RHO_STEP, _RHO_STEP)
    vals = np.empty_like(grid)
    for start in range(0, grid.size, 2048):
        chunk = grid[start:start + 2048]
        vals[start:start + 2048] = 2.0 * (np.cos(2 * np.pi * np.outer(chunk, x)) @ w)
    return CubicSpline(grid, vals)


def radial_fourier(m: int, rho, exact: bool = False) -> np.ndarray:
    """Fourier transform of eta_0(|x|) on R^m at radius rho (tabulated spline by default).

    Beyond rho = 200 the transform is below 1e-15 and is returned as 0.
    """
    rho = np.abs(np.asarray(rho, dtype=float))
    if exact:
        return _radial_fourier_direct(m, rho)
    out = np.zeros_like(rho)
    inside = rho <= _RHO_MAX
    if np.any(inside):
        out[inside] = _radial_table(m)(rho[inside])
    return out


def bump_fourier(v: np.ndarray, scales: np.ndarray, A: float, tau: float) -> np.ndarray:
    """int_{R^m} eta_{<=A}(scales o xi) e(v . xi) d xi for integer/real frequency rows v.

    ``scales`` holds the per-axis dilation factors (tau^{k l} for the partial
    dilation).  With R = tau^floor(A) this is R^m / prod(scales) * F(R |v / scales|).
    """
    v = np.asarray(v, dtype=float)
    scales = np.asarray(scales, dtype=float)
    m = scales.size
    if A < 0:
        return np.zeros(v.shape[:-1])
    R = tau ** math.floor(A)
    rho = R * np.sqrt(np.sum((v / scales) ** 2, axis=-1))
    return R**m / np.prod(scales) * radial_fourier(m, rho)

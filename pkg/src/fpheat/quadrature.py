"""Quadrature building blocks shared by the operator and the functionals.

Everything here is a pure function returning node/weight arrays.  Rules are
cached because the same orders are requested over and over inside loops.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


class Estimate(NamedTuple):
    """A quadrature value together with an absolute error estimate."""

    value: float
    error: float


@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = roots_legendre(n)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=256)
def _gauss_jacobi01(n: int, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = roots_jacobi(n, 0.0, alpha)
    return 0.5 * (x + 1.0), w * 2.0 ** (-alpha - 1.0)


def gauss_jacobi01(n: int, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights for ``int_0^1 f(t) t**alpha dt`` (alpha > -1)."""
    if alpha <= -1.0:
        raise ValueError(f"Jacobi weight t^{alpha} is not integrable at 0")
    return _gauss_jacobi01(int(n), round(float(alpha), 14))


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d (2 points for d=1)."""
    return 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)


@lru_cache(maxsize=32)
def sphere_rule(d: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Antipodally symmetric direction rule on the unit sphere.

    Returns ``(dirs, w)`` with ``dirs`` of shape (m, d) and weights summing to
    the sphere area.  Direction ``k`` and ``k + m//2`` are antipodes, which is
    what makes symmetrized sums cancel exactly for odd data.
    """
    if d == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if d == 2:
        m = 2 * max(2, n)
        th = (np.arange(m) + 0.5) * (2.0 * np.pi / m)
        dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
        return dirs, np.full(m, 2.0 * np.pi / m)
    if d == 3:
        nc = 2 * max(1, (n + 1) // 2)  # even, so no node sits on the equator
        c, wc = roots_legendre(nc)
        nphi = 2 * nc
        phi = (np.arange(nphi) + 0.5) * (2.0 * np.pi / nphi)
        up = c > 0
        cc, pp = np.meshgrid(c[up], phi, indexing="ij")
        sn = np.sqrt(1.0 - cc**2)
        half = np.stack([sn * np.cos(pp), sn * np.sin(pp), cc], axis=-1).reshape(-1, 3)
        wh = np.repeat(wc[up], nphi) * (2.0 * np.pi / nphi)
        return np.concatenate([half, -half]), np.concatenate([wh, wh])
    raise ValueError(f"unsupported dimension {d}")


def geometric_radii(r0: float, r1: float, count: int) -> np.ndarray:
    """``count`` geometrically graded panels between r0 > 0 and r1."""
    return np.geomspace(r0, r1, count + 1)


def merge_breaks(radii: np.ndarray, extra, lo: float, hi: float) -> np.ndarray:
    """Insert extra breakpoints lying strictly inside (lo, hi) into ``radii``."""
    extra = np.asarray(list(extra), dtype=float)
    if extra.size:
        extra = extra[(extra > lo * (1 + 1e-12)) & (extra < hi * (1 - 1e-12))]
    out = np.unique(np.concatenate([radii, extra]))
    # drop panels too thin to matter; they only cost evaluations
    keep = np.concatenate([[True], np.diff(out) > 1e-14 * max(1.0, hi)])
    return out[keep]


def panel_rule(breaks: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre rule on consecutive panels ``breaks``."""
    t, w = gauss_legendre(n)
    a = breaks[:-1, None]
    L = np.diff(breaks)[:, None]
    return (a + L * t).ravel(), (L * w).ravel()

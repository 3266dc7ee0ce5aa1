"""Parameters, fields, exterior data and the two global functionals.

The equation lives on all of R^d, so a field is always a pair: node values on
a uniform box grid plus a closed-form description of the function outside the
box (the *tail*).  Tails come from a small catalog so that their far-field
integrals can be done by substitution instead of truncation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .quadrature import (
    Estimate,
    gauss_jacobi01,
    gauss_legendre,
    panel_rule,
    sphere_rule,
)


class ParameterError(ValueError):
    """Raised when (s, p, d) leave the admissible degenerate range."""


class TailError(ValueError):
    """Raised when an exterior description has no finite tail norm."""


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FracParams:
    """Order ``s``, growth exponent ``p`` and dimension ``d``.

    Construction validates ``0 < s < 1``, ``2 <= p < 2/(1-s)`` and
    ``d in {1, 2, 3}``.
    """

    s: float
    p: float
    d: int = 1

    def __post_init__(self):
        s, p, d = self.s, self.p, self.d
        if not (0.0 < s < 1.0):
            raise ParameterError(f"s out of range: need 0 < s < 1, got s={s}")
        if d not in (1, 2, 3):
            raise ParameterError(f"unsupported dimension d={d}; only 1, 2, 3")
        if not (p >= 2.0 and p * (1.0 - s) < 2.0):
            raise ParameterError(
                f"p out of range: need 2 ≤ p < 2/(1−s) = {2.0 / (1.0 - s):.6g}, got p={p}"
            )

    @property
    def sp(self) -> float:
        return self.s * self.p

    @property
    def q_c(self) -> float:
        return -1.0 + self.p * (1.0 - self.s)

    @property
    def gamma_barrier(self) -> float:
        return max(max(1.0 - self.q_c / (self.p - 1.0), 0.0), 1.0)

    @property
    def alpha_is_strict(self) -> bool:
        """True when the time exponent is only a strict upper bound."""
        return self.q_c <= 0.0

    @property
    def alpha_predicted(self) -> float:
        if self.q_c > 0.0:
            return 1.0
        return 1.0 / (1.0 - self.q_c)

    @property
    def alpha_label(self) -> str:
        a = f"{self.alpha_predicted:.6g}"
        return a + "-" if self.alpha_is_strict else a

    @property
    def kernel_exponent(self) -> float:
        return self.d + self.sp


def make_params(s: float, p: float, d: int = 1) -> FracParams:
    return FracParams(float(s), float(p), int(d))


def j_p(tau, p: float):
    """``|tau|^(p-2) tau``, exact for p = 2 and p = 3."""
    tau = np.asarray(tau, dtype=float)
    if p == 2.0:
        return tau.copy()
    if p == 3.0:
        return np.abs(tau) * tau
    return np.abs(tau) ** (p - 2.0) * tau


def j_p_prime_bound(tau, p: float, delta: float = 0.0):
    """``(p-1)(|tau| + delta)^(p-2)``, the slope bound used for step sizes."""
    tau = np.asarray(tau, dtype=float)
    if p == 2.0:
        return np.ones_like(tau)
    return (p - 1.0) * (np.abs(tau) + delta) ** (p - 2.0)


def chord_integral(a, b, p: float):
    """``int_0^1 |b + tau (a - b)|^(p-2) dtau`` in closed form.

    Equals ``(J_p(a) - J_p(b)) / ((p - 1)(a - b))`` off the diagonal and
    ``|a|^(p-2)`` on it.
    """
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    if p == 2.0:
        return np.ones_like(a)
    diff = a - b
    # near the diagonal the quotient cancels; use the midpoint value there
    near = np.abs(diff) <= 1e-8 * np.maximum(np.abs(a), np.abs(b))
    safe = np.where(near, 1.0, diff)
    out = (j_p(a, p) - j_p(b, p)) / ((p - 1.0) * safe)
    return np.where(near, np.abs(0.5 * (a + b)) ** (p - 2.0), out)


@dataclass(frozen=True)
class ChordAudit:
    """Sample envelope of ``chord_integral(a, b) / (|b| + |a - b|)^(p-2)``."""

    p: float
    low: float
    high: float
    low_doubled: float
    high_doubled: float
    samples: int

    @property
    def stable(self) -> bool:
        """Both envelope ends move by at most 5% when the sample is doubled."""
        return (abs(self.low_doubled - self.low) <= 0.05 * self.low
                and abs(self.high_doubled - self.high) <= 0.05 * self.high)


def _chord_ratio(a, b, p):
    return chord_integral(a, b, p) / (np.abs(b) + np.abs(a - b)) ** (p - 2.0)


def chord_sandwich_audit(p: float, sample_count: int = 10_000, seed: int = 0) -> ChordAudit:
    """Envelope of the chord ratio over uniform ``(a, b)`` in ``[-1, 1]^2``, and over a fresh sample twice as large.

    The ratio is homogeneous of degree 0, so the square loses nothing.
    """
    rng = np.random.default_rng(seed)
    r1 = _chord_ratio(*rng.uniform(-1.0, 1.0, size=(2, sample_count)), p)
    r2 = _chord_ratio(*rng.uniform(-1.0, 1.0, size=(2, 2 * sample_count)), p)
    return ChordAudit(p, float(r1.min()), float(r1.max()), float(r2.min()), float(r2.max()), sample_count)


# ---------------------------------------------------------------------------
# tails
# ---------------------------------------------------------------------------


def _as_points(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return x.reshape(1, 1)
    if x.ndim == 1:
        return x.reshape(-1, 1) if d == 1 else x.reshape(1, d)
    return x


@dataclass(frozen=True)
class ZeroExtension:
    tag = "zero"

    def value(self, pts: np.ndarray) -> np.ndarray:
        return np.zeros(len(pts))

    @property
    def growth(self) -> float:
        return 0.0

    @property
    def constant(self):
        return 0.0

    def scaled(self, lam: float) -> "ZeroExtension":
        return self

    def shifted(self, c: float):
        return ConstantExtension(c) if c != 0.0 else self


@dataclass(frozen=True)
class ConstantExtension:
    value_: float

    tag = "constant"

    def value(self, pts: np.ndarray) -> np.ndarray:
        return np.full(len(pts), float(self.value_))

    @property
    def growth(self) -> float:
        return 0.0

    @property
    def constant(self):
        return float(self.value_)

    def scaled(self, lam: float) -> "ConstantExtension":
        return ConstantExtension(lam * self.value_)

    def shifted(self, c: float) -> "ConstantExtension":
        return ConstantExtension(self.value_ + c)


TAIL_KINDS = ("power", "bump", "affine")


@dataclass(frozen=True)
class AnalyticTail:
    """Closed-form exterior profile from a fixed catalog.

    ``power``:  offset + amplitude * (1 + |x|^2 / radius^2)^(-exponent/2)
    ``bump``:   offset + amplitude * (1 - |x|^2 / radius^2)_+^3
    ``affine``: offset + amplitude + slope . x

    ``exponent`` may be negative (mild growth); admissibility against the
    tail space is checked by :func:`check_tail`.
    """

    kind: str
    amplitude: float = 1.0
    exponent: float = 0.0
    radius: float = 1.0
    slope: tuple = ()
    offset: float = 0.0

    tag = "analytic"

    def __post_init__(self):
        if self.kind not in TAIL_KINDS:
            raise ValueError(f"unknown tail profile {self.kind!r}; catalog is {TAIL_KINDS}")
        if self.radius <= 0:
            raise ValueError("tail radius must be positive")
        object.__setattr__(self, "slope", tuple(float(v) for v in self.slope))

    def value(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        r2 = np.sum(pts**2, axis=1)
        if self.kind == "power":
            v = self.amplitude * (1.0 + r2 / self.radius**2) ** (-0.5 * self.exponent)
        elif self.kind == "bump":
            v = self.amplitude * np.clip(1.0 - r2 / self.radius**2, 0.0, None) ** 3
        else:
            sl = np.zeros(pts.shape[1])
            sl[: len(self.slope)] = self.slope[: pts.shape[1]]
            v = self.amplitude + pts @ sl
        return v + self.offset

    @property
    def growth(self) -> float:
        if self.kind == "power":
            return -self.exponent
        if self.kind == "affine" and any(self.slope):
            return 1.0
        return 0.0

    @property
    def constant(self):
        return None

    def scaled(self, lam: float) -> "AnalyticTail":
        return AnalyticTail(
            self.kind,
            lam * self.amplitude,
            self.exponent,
            self.radius,
            tuple(lam * v for v in self.slope),
            lam * self.offset,
        )

    def shifted(self, c: float) -> "AnalyticTail":
        return AnalyticTail(self.kind, self.amplitude, self.exponent, self.radius, self.slope, self.offset + c)


TailSpec = Union[ZeroExtension, ConstantExtension, AnalyticTail]


def check_tail(tail: TailSpec, params: FracParams) -> None:
    """Reject tails whose weighted (p-1)-norm diverges at infinity."""
    g = tail.growth
    if g > 0 and (params.p - 1.0) * g >= params.sp:
        raise TailError(
            "tail not integrable at requested tolerance: growth |x|^%g needs "
            "(p-1)*%g < sp = %g" % (g, g, params.sp)
        )


def tail_weight_exponent(params: FracParams, growth: float) -> float:
    """Jacobi exponent for far-field integrals after the r = R/t substitution."""
    return params.sp - 1.0 - (params.p - 1.0) * max(growth, 0.0)


# ---------------------------------------------------------------------------
# grids and fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UniformGrid:
    """Uniform node grid on the box ``center +- half_width`` (per axis)."""

    center: tuple
    half_width: tuple
    h: float

    def __post_init__(self):
        c = tuple(float(v) for v in np.atleast_1d(self.center))
        hw = tuple(float(v) for v in np.atleast_1d(self.half_width))
        if len(hw) == 1 and len(c) > 1:
            hw = hw * len(c)
        if len(c) != len(hw):
            raise ValueError("center and half_width have different lengths")
        if self.h <= 0:
            raise ValueError("grid spacing must be positive")
        shape = []
        for w in hw:
            n = 2.0 * w / self.h
            if abs(n - round(n)) > 1e-8 * max(1.0, n):
                raise ValueError(f"half-width {w} is not a multiple of h/2 = {self.h / 2}")
            if round(n) + 1 < 3:
                raise ValueError("need at least 3 nodes per axis")
            shape.append(int(round(n)) + 1)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "half_width", hw)
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "_shape", tuple(shape))

    @classmethod
    def from_nodes(cls, nodes: int | Sequence[int], half_width=1.0, center=None, d: int | None = None):
        hw = np.atleast_1d(np.asarray(half_width, dtype=float))
        nodes = np.atleast_1d(nodes)
        if d is None:
            d = max(len(hw), len(nodes), 1 if center is None else len(np.atleast_1d(center)))
        hw = np.broadcast_to(hw, (d,))
        nodes = np.broadcast_to(nodes, (d,))
        h = 2.0 * hw[0] / (nodes[0] - 1)
        c = np.zeros(d) if center is None else np.broadcast_to(np.asarray(center, float), (d,))
        return cls(tuple(c), tuple(hw), h)

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def shape(self) -> tuple:
        return self._shape

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.center) - np.asarray(self.half_width)

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.center) + np.asarray(self.half_width)

    @property
    def axes(self) -> list:
        return [lo + self.h * np.arange(n) for lo, n in zip(self.lo, self.shape)]

    def nodes(self) -> np.ndarray:
        """All node coordinates, row-major, shape (N, d)."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def interior_mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[(slice(1, -1),) * self.dim] = True
        return m

    def interior(self) -> "UniformGrid":
        return UniformGrid(self.center, tuple(w - self.h for w in self.half_width), self.h)

    def contains(self, pts, margin: float = 0.0) -> np.ndarray:
        pts = _as_points(pts, self.dim)
        return np.all((pts >= self.lo + margin - 1e-12) & (pts <= self.hi - margin + 1e-12), axis=1)

    def interpolate(self, values: np.ndarray, pts: np.ndarray) -> np.ndarray:
        """Piecewise-multilinear interpolation; points must lie in the box."""
        pts = _as_points(pts, self.dim)
        idx = (pts - self.lo) / self.h
        out = np.zeros(len(pts))
        base = []
        frac = []
        for k, n in enumerate(self.shape):
            i0 = np.clip(np.floor(idx[:, k]).astype(int), 0, n - 2)
            base.append(i0)
            frac.append(np.clip(idx[:, k] - i0, 0.0, 1.0))
        for corner in np.ndindex(*(2,) * self.dim):
            wgt = np.ones(len(pts))
            ii = []
            for k, c in enumerate(corner):
                wgt = wgt * (frac[k] if c else 1.0 - frac[k])
                ii.append(base[k] + c)
            out += wgt * values[tuple(ii)]
        return out

    def same_as(self, other: "UniformGrid") -> bool:
        return (
            np.allclose(self.center, other.center)
            and np.allclose(self.half_width, other.half_width)
            and math.isclose(self.h, other.h)
        )


@dataclass(frozen=True, eq=False)
class GridField:
    """Node values on a :class:`UniformGrid` plus the exterior description."""

    grid: UniformGrid
    values: np.ndarray
    tail: TailSpec = field(default_factory=ZeroExtension)

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("grid field has non-finite node values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, f: Callable, grid: UniformGrid, tail: TailSpec | None = None) -> "GridField":
        vals = np.asarray(f(grid.nodes()), dtype=float).reshape(grid.shape)
        return cls(grid, vals, ZeroExtension() if tail is None else tail)

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def dim(self) -> int:
        return self.grid.dim

    def evaluate(self, pts) -> np.ndarray:
        """Interpolant inside the node box, tail outside it."""
        pts = _as_points(pts, self.dim)
        inside = self.grid.contains(pts)
        out = np.empty(len(pts))
        if inside.any():
            out[inside] = self.grid.interpolate(self.values, pts[inside])
        if (~inside).any():
            out[~inside] = self.tail.value(pts[~inside])
        return out

    __call__ = evaluate

    def with_values(self, values) -> "GridField":
        return GridField(self.grid, values, self.tail)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def oscillation(self) -> float:
        return float(np.ptp(self.values))


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Slices ``values[k]`` at strictly increasing ``times[k]`` on one grid."""

    grid: UniformGrid
    times: np.ndarray
    values: np.ndarray
    tail: TailSpec = field(default_factory=ZeroExtension)

    def __post_init__(self):
        t = np.array(self.times, dtype=float).ravel()
        v = np.array(self.values, dtype=float).reshape((len(t),) + self.grid.shape)
        if len(t) > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("slice times must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("space-time field has non-finite values")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_slices(cls, times, slices: Sequence[GridField]) -> "SpaceTimeField":
        g = slices[0].grid
        for sl in slices[1:]:
            if not sl.grid.same_as(g) or type(sl.tail) is not type(slices[0].tail):
                raise ValueError("all slices must share box, h and tail family")
        return cls(g, times, np.stack([sl.values for sl in slices]), slices[0].tail)

    @classmethod
    def from_function(cls, f: Callable, grid: UniformGrid, times, tail: TailSpec | None = None):
        """``f(points, t)`` sampled on every slice."""
        pts = grid.nodes()
        vals = np.stack([np.asarray(f(pts, t), dtype=float).reshape(grid.shape) for t in times])
        return cls(grid, times, vals, ZeroExtension() if tail is None else tail)

    def __len__(self) -> int:
        return len(self.times)

    def slice(self, k: int) -> GridField:
        return GridField(self.grid, self.values[k], self.tail)

    def slices(self):
        return [self.slice(k) for k in range(len(self))]

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True)
class ParabolicCylinder:
    """``B_r(center) x (t0 - r^2, t0]``."""

    center: tuple
    r: float
    t0: float

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("cylinder radius must be positive")
        object.__setattr__(self, "center", tuple(float(v) for v in np.atleast_1d(self.center)))

    @property
    def t_start(self) -> float:
        return self.t0 - self.r**2

    def contains(self, x, t) -> np.ndarray:
        x = _as_points(x, len(self.center))
        t = np.broadcast_to(np.asarray(t, dtype=float), (len(x),))
        inside = np.linalg.norm(x - np.asarray(self.center), axis=1) < self.r
        return inside & (t > self.t_start) & (t <= self.t0)


# ---------------------------------------------------------------------------
# functionals
# ---------------------------------------------------------------------------


def _graded_breaks(a: float, b: float, count: int = 12, ratio: float = 0.5) -> np.ndarray:
    """Breakpoints on [a, b] refined geometrically toward both ends."""
    L = b - a
    k = np.arange(count)
    left = a + 0.5 * L * ratio**k
    right = b - 0.5 * L * ratio**k
    return np.unique(np.concatenate([[a, b], left, right]))


def _far_field(f, params: FracParams, growth: float, radius_of_dir, n: int):
    """Integral of ``f`` over the exterior of a star-shaped set.

    ``radius_of_dir(dirs)`` gives the exit radius along each direction; beyond
    it, ``r = R/t`` maps the ray onto (0, 1] with a Jacobi weight that absorbs
    the algebraic decay of the integrand.
    """
    d = params.d
    dirs, wd = sphere_rule(d, max(8, n))
    R = radius_of_dir(dirs)
    alpha = tail_weight_exponent(params, growth)
    t, wt = gauss_jacobi01(n, alpha)
    pts = (dirs[:, None, :] * (R[:, None] / t[None, :])[..., None]).reshape(-1, d)
    vals = f(pts).reshape(len(dirs), len(t))
    jac = (R[:, None] ** d) * t[None, :] ** (-d - 1.0 - alpha)
    return float(np.sum(wd[:, None] * wt[None, :] * vals * jac))


def _box_integral(f, lo, hi, breaks_per_axis, order):
    mesh_x = []
    mesh_w = []
    for k in range(len(lo)):
        br = breaks_per_axis[k]
        x, w = panel_rule(br, order)
        mesh_x.append(x)
        mesh_w.append(w)
    grids = np.meshgrid(*mesh_x, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wts = np.ones(1)
    for w in mesh_w:
        wts = np.multiply.outer(wts, w)
    return float(np.sum(f(pts) * wts.ravel()))


def tail_norm(w, params: FracParams, *, tol: float = 1e-10, r_trunc: float | None = None,
              order: int = 8, growth: float | None = None) -> Estimate:
    """Weighted norm ``(int |w|^(p-1) / (1 + |x|^(d+sp)) dx)^(1/(p-1))``.

    ``w`` may be a :class:`GridField`, a catalog tail, or a vectorized
    callable on ``(N, d)`` points (then ``growth`` describes its behaviour at
    infinity, default bounded).  The cube ``[-R, R]^d`` is integrated with
    graded Gauss-Legendre panels; beyond it a Jacobi rule handles the decay.
    """
    d, q = params.d, params.p - 1.0
    if isinstance(w, GridField):
        check_tail(w.tail, params)
        g = w.tail.growth
        lo, hi = w.grid.lo, w.grid.hi
        R = r_trunc if r_trunc is not None else 64.0 * max(w.grid.half_width) + float(np.max(np.abs(w.grid.center)))
        func = w.evaluate
        inner_axes = w.grid.axes
    else:
        if hasattr(w, "growth") and hasattr(w, "value"):
            check_tail(w, params)
            g = w.growth
            func = w.value
        else:
            g = 0.0 if growth is None else growth
            func = w
            if g > 0 and q * g >= params.sp:
                raise TailError("tail not integrable at requested tolerance")
        R = r_trunc if r_trunc is not None else 64.0
        lo = hi = None
        inner_axes = None

    def integrand(pts):
        r = np.linalg.norm(pts, axis=1)
        return np.abs(func(pts)) ** q / (1.0 + r ** (d + params.sp))

    def cube(order_):
        br = []
        for k in range(d):
            b = [np.linspace(-R, R, 3), -np.geomspace(1e-3, R, 40), np.geomspace(1e-3, R, 40), [0.0]]
            if inner_axes is not None:
                b.append(inner_axes[k])
                # grade toward the box faces where the interpolant meets the tail
                b.append(lo[k] - np.geomspace(1e-3, max(R + lo[k], 1e-3), 12))
                b.append(hi[k] + np.geomspace(1e-3, max(R - hi[k], 1e-3), 12))
            br.append(np.unique(np.clip(np.concatenate(b), -R, R)))
        o = order_ if d == 1 else max(2, order_ // 2)
        return _box_integral(integrand, [-R] * d, [R] * d, br, o)

    def outside(n):
        return _far_field(integrand, params, g, lambda dirs: R / np.max(np.abs(dirs), axis=1), n)

    v1 = cube(order) + outside(24)
    v2 = cube(2 * order) + outside(48)
    total = max(v2, 0.0)
    err_int = abs(v2 - v1)
    if not np.isfinite(total) or err_int > max(1e3 * tol, 1e-6) * max(1.0, total):
        raise TailError("tail not integrable at requested tolerance")
    val = total ** (1.0 / q)
    # propagate through the 1/(p-1) root
    err = (1.0 / q) * total ** (1.0 / q - 1.0) * err_int if total > 0 else err_int ** (1.0 / q)
    return Estimate(float(val), float(err))


def _exit_distance(x: np.ndarray, dirs: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Distance from interior points ``x`` (N, d) to the box boundary along dirs (m, d)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        up = (hi[None, None, :] - x[:, None, :]) / dirs[None, :, :]
        dn = (lo[None, None, :] - x[:, None, :]) / dirs[None, :, :]
        t = np.where(dirs[None, :, :] > 0, up, np.where(dirs[None, :, :] < 0, dn, np.inf))
    return np.clip(np.min(t, axis=2), 0.0, None)


def _box_pair_integral(F, box_lo, box_hi, params: FracParams, n_out: int, n_in: int, n_dir: int,
                       panels: int = 10) -> float:
    """``int_box int_box F(x, y) |x-y|^(-d-sp) dy dx`` for F vanishing like |x-y|^p.

    Inner integral in polar coordinates about x; the radial factor r^(q_c)
    left after dividing F by r^p is taken into a Jacobi weight.
    """
    d = params.d
    br = [_graded_breaks(a, b, panels) for a, b in zip(box_lo, box_hi)]
    xs, ws = [], []
    for k in range(d):
        x, w = panel_rule(br[k], n_out)
        xs.append(x)
        ws.append(w)
    mesh = np.meshgrid(*xs, indexing="ij")
    X = np.stack([m.ravel() for m in mesh], axis=1)
    WX = np.ones(1)
    for w in ws:
        WX = np.multiply.outer(WX, w)
    WX = WX.ravel()
    dirs, wd = sphere_rule(d, n_dir)
    t, wt = gauss_jacobi01(n_in, params.q_c)
    total = 0.0
    chunk = max(1, 200000 // (len(dirs) * len(t)))
    for i0 in range(0, len(X), chunk):
        x = X[i0:i0 + chunk]
        rho = _exit_distance(x, dirs, np.asarray(box_lo, float), np.asarray(box_hi, float))
        r = rho[..., None] * t[None, None, :]
        y = x[:, None, None, :] + r[..., None] * dirs[None, :, None, :]
        xx = np.broadcast_to(x[:, None, None, :], y.shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = F(xx.reshape(-1, d), y.reshape(-1, d)).reshape(r.shape) / r**params.p
        val = np.where(r > 0, val, 0.0)
        inner = rho ** (1.0 + params.q_c) * np.sum(wt * val, axis=2)
        total += float(np.sum(WX[i0:i0 + chunk] * np.sum(wd * inner, axis=1)))
    return total


def _as_callable(w):
    if isinstance(w, GridField):
        return w.evaluate
    return w


def gagliardo_seminorm(w, box, params: FracParams, *, order: int = 8) -> Estimate:
    """``(int_box int_box |w(x)-w(y)|^p / |x-y|^(d+sp))^(1/p)``.

    ``box`` is ``(lo, hi)`` with per-axis bounds (scalars allowed in 1D).
    """
    lo = np.atleast_1d(np.asarray(box[0], dtype=float))
    hi = np.atleast_1d(np.asarray(box[1], dtype=float))
    f = _as_callable(w)
    p = params.p

    def F(x, y):
        return np.abs(f(x) - f(y)) ** p

    n_dir = 6 if params.d > 1 else 1
    v1 = _box_pair_integral(F, lo, hi, params, order, order, n_dir)
    v2 = _box_pair_integral(F, lo, hi, params, 2 * order, 2 * order, 2 * n_dir if params.d > 1 else 1)
    v2 = max(v2, 0.0)
    val = v2 ** (1.0 / p)
    err_int = abs(v2 - v1)
    err = (1.0 / p) * v2 ** (1.0 / p - 1.0) * err_int if v2 > 0 else err_int ** (1.0 / p)
    return Estimate(float(val), float(err))

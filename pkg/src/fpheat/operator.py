"""Evaluation of the fractional p-Laplacian and the associated energy form.

Two evaluation paths live here:

* :func:`frac_p_laplacian_point` -- an accurate pointwise principal-value
  integral for analytic data or interpolated grid data, with error estimate.
* :class:`NodeOperator` -- the node-quadrature discretization used by the
  time stepper.  It is a sum ``sum_j W_ij J_p(u_i - u_j)`` with symmetric,
  nonnegative weights plus exterior ghost terms, which is what makes the
  explicit scheme monotone and its energy a discrete Gagliardo energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .core import (
    AnalyticTail,
    ConstantExtension,
    FracParams,
    GridField,
    ParabolicCylinder,
    TailError,
    UniformGrid,
    ZeroExtension,
    _as_points,
    _exit_distance,
    _graded_breaks,
    check_tail,
    j_p,
    j_p_prime_bound,
    tail_weight_exponent,
)
from .quadrature import (
    Estimate,
    gauss_jacobi01,
    gauss_legendre,
    merge_breaks,
    panel_rule,
    sphere_area,
    sphere_rule,
)


class QuadratureError(RuntimeError):
    """Raised when a requested evaluation point or tolerance cannot be met."""


@dataclass(frozen=True)
class QuadConfig:
    """Quadrature controls for pointwise evaluation.

    ``eps_pv`` is the radius of the symmetrized inner ball, ``ring_count`` the
    number of geometric annuli between ``eps_pv`` and ``r_tail``.
    """

    eps_pv: float = 0.05
    ring_count: int = 32
    tol: float = 1e-8
    r_tail: float = 64.0
    order: int = 8
    n_dir: int = 16
    inner_rings: int = 40

    def __post_init__(self):
        if not (0.0 < self.eps_pv < self.r_tail):
            raise ValueError("need 0 < eps_pv < r_tail")
        if self.ring_count < 4:
            raise ValueError("ring_count must be >= 4")
        if self.tol <= 0:
            raise ValueError("tol must be positive")

    @classmethod
    def for_grid(cls, grid: UniformGrid, **kw) -> "QuadConfig":
        kw.setdefault("eps_pv", grid.h / 2)
        kw.setdefault("r_tail", 64.0 * max(grid.half_width) + float(np.max(np.abs(grid.center))))
        return cls(**kw)


# ---------------------------------------------------------------------------
# pointwise evaluation
# ---------------------------------------------------------------------------


class _LocalQuadratic:
    """Second-order Taylor model of grid data around its nearest node."""

    def __init__(self, u: GridField, x: np.ndarray):
        g = u.grid
        h = g.h
        idx = np.rint((x - g.lo) / h).astype(int)
        v = u.values
        d = g.dim
        self.xn = g.lo + idx * h
        self.grad = np.zeros(d)
        self.hess = np.zeros((d, d))
        e = np.eye(d, dtype=int)

        def at(off):
            return v[tuple(idx + off)]

        c = at(np.zeros(d, dtype=int))
        for k in range(d):
            up, dn = at(e[k]), at(-e[k])
            self.grad[k] = (up - dn) / (2 * h)
            self.hess[k, k] = (up - 2 * c + dn) / h**2
            for l in range(k + 1, d):
                m = (at(e[k] + e[l]) - at(e[k] - e[l]) - at(-e[k] + e[l]) + at(-e[k] - e[l])) / (4 * h * h)
                self.hess[k, l] = self.hess[l, k] = m
        self.x = x
        # gradient of the model at x itself
        self.gx = self.grad + self.hess @ (x - self.xn)

    def increments(self, z: np.ndarray) -> np.ndarray:
        """``m(x + z) - m(x)`` computed without cancellation."""
        return z @ self.gx + 0.5 * np.einsum("ni,ij,nj->n", z, self.hess, z)


def _ring_sum(incr: Callable, radii_lo, radii_hi, dirs, wd, params: FracParams, n: int, with_max: bool = False):
    """Sum of ring integrals of ``sum_dir J_p(-incr) r^(-1-sp)`` dr, per ring."""
    t, w = gauss_legendre(n)
    L = (radii_hi - radii_lo)[:, None]
    r = radii_lo[:, None] + L * t[None, :]
    wr = L * w[None, :]
    z = (r[..., None, None] * dirs[None, None, :, :]).reshape(-1, dirs.shape[1])
    inc = incr(z).reshape(r.shape + (len(dirs),))
    val = np.sum(j_p(-inc, params.p) * wd, axis=-1) * r ** (-1.0 - params.sp)
    out = np.sum(val * wr, axis=1)
    if with_max:
        return out, np.max(np.abs(inc).reshape(len(out), -1), axis=1)
    return out


def _inner_ball(incr, eps, params, quad: QuadConfig, depth: int, dirs, wd, noise: float = 0.0):
    """P.V. integral over B_eps as a sum over dyadic rings plus geometric tail.

    ``noise`` is the absolute rounding level of one increment.  When it is
    positive the ring series is truncated where the geometric-remainder
    spread plus the rounding accumulated by the inner rings is smallest.
    """
    hi = eps * 0.5 ** np.arange(depth)
    lo = hi * 0.5
    c1 = _ring_sum(incr, lo, hi, dirs, wd, params, quad.order)
    c2, imax = _ring_sum(incr, lo, hi, dirs, wd, params, 2 * quad.order, with_max=True)
    quad_err = np.cumsum(np.abs(c2 - c1))
    if noise > 0:
        p, sp = params.p, params.sp
        slope = 1.0 if p == 2.0 else (p - 1.0) * (imax + noise) ** (p - 2.0)
        kern = float(np.sum(wd)) * (lo ** (-sp) - hi ** (-sp)) / sp
        rnd = np.cumsum(4.0 * noise * slope * kern)
    else:
        rnd = np.zeros(depth)
    best = None
    for k in range(3, depth + 1):
        rest, spread = _geometric_rest(c2[:k])
        err = float(quad_err[k - 1] + rnd[k - 1] + spread)
        if best is None or err < best[1]:
            best = (float(np.sum(c2[:k])) + rest, err)
    if best is None:
        rest, spread = _geometric_rest(c2)
        best = (float(np.sum(c2)) + rest, float(quad_err[-1] + rnd[-1] + spread))
    return best


def _geometric_rest(c):
    """Remainder of a ring series assumed geometric, with a spread estimate.

    The spread compares the prediction from the last two rings with the one
    made a ring earlier, so an exact power law has zero spread."""
    a, b = c[-2], c[-1]
    if not (a != 0.0 and b != 0.0 and np.sign(a) == np.sign(b) and abs(b) < abs(a)):
        return 0.0, 2.0 * abs(b)
    rho = b / a
    rest = b * rho / (1.0 - rho)
    if len(c) >= 3 and c[-3] != 0.0 and np.sign(c[-3]) == np.sign(a) and abs(a) < abs(c[-3]):
        rho0 = a / c[-3]
        prev = a * rho0 / (1.0 - rho0) - b
        spread = abs(rest - prev)
    else:
        spread = abs(rest)
    return rest, spread + 1e-14 * abs(rest)


def _radial_breakpoints(x: np.ndarray, points, box=None) -> list:
    out = []
    for b in points:
        out.append(float(np.linalg.norm(np.atleast_1d(b) - x)))
    if box is not None:
        lo, hi = box
        for k in range(len(x)):
            out.extend([abs(x[k] - lo[k]), abs(hi[k] - x[k])])
    return out


def frac_p_laplacian_point(u, x, params: FracParams, quad: QuadConfig | None = None, *,
                           breakpoints: Sequence = (), growth: float | None = None) -> Estimate:
    """P.V. integral of ``J_p(u(x) - u(y)) |x - y|^(-d-sp)`` over R^d.

    ``u`` is a :class:`GridField` (evaluated through its multilinear
    interpolant and tail) or a vectorized callable on (N, d) points defined on
    all of R^d.  For callables, ``growth`` is the power growth at infinity
    (default 0, bounded) and ``breakpoints`` lists points where ``u`` is not
    smooth, which become radial panel breaks.
    """
    d = params.d
    x = np.atleast_1d(np.asarray(x, dtype=float)).reshape(d)
    if isinstance(u, GridField):
        grid = u.grid
        quad = quad or QuadConfig.for_grid(grid)
        check_tail(u.tail, params)
        margin = min(np.min(x - grid.lo), np.min(grid.hi - x))
        if margin < quad.eps_pv + grid.h - 1e-12:
            raise QuadratureError(
                f"x={x} is too close to the interpolation boundary (margin {margin:g} < eps_pv + h)"
            )
        f = u.evaluate
        g = u.tail.growth
        ux = float(f(x[None, :])[0])
        model = _LocalQuadratic(u, x)
        incr = model.increments
        noise = 0.0
        depth = quad.inner_rings
        brk = list(breakpoints)
        if d == 1:
            brk.extend(grid.axes[0])
        radial = _radial_breakpoints(x, brk, (grid.lo, grid.hi))
        const_tail = u.tail.constant
        hull_reach = float(np.max(np.linalg.norm(np.stack(np.meshgrid(*[[a, b] for a, b in zip(grid.lo, grid.hi)], indexing="ij"), -1).reshape(-1, d) - x, axis=1)))
    else:
        quad = quad or QuadConfig()
        f = u
        g = 0.0 if growth is None else growth
        if g > 0 and (params.p - 1.0) * g >= params.sp:
            raise TailError("tail not integrable at requested tolerance")
        ux = float(np.asarray(f(x[None, :]))[0])

        def incr(z):
            return f(x[None, :] + z) - ux

        # rounding in u(x+z) - u(x) is amplified by r^(-sp); _inner_ball trades it against truncation
        noise = 2.0 * np.finfo(float).eps * max(abs(ux), 1e-300)
        depth = quad.inner_rings
        radial = _radial_breakpoints(x, breakpoints)
        const_tail = None
        hull_reach = np.inf

    dirs, wd = sphere_rule(d, quad.n_dir)

    inner_v, inner_e = _inner_ball(incr, quad.eps_pv, params, quad, depth, dirs, wd, noise)

    # annulus eps_pv .. r_tail through the full function
    radii = np.geomspace(quad.eps_pv, quad.r_tail, quad.ring_count + 1)
    radii = merge_breaks(radii, radial, quad.eps_pv, quad.r_tail)

    def annulus(n):
        r, w = panel_rule(radii, n)
        y = (x[None, None, :] + r[:, None, None] * dirs[None, :, :]).reshape(-1, d)
        vals = f(y).reshape(len(r), len(dirs))
        s = np.sum(j_p(ux - vals, params.p) * wd, axis=1)
        return float(np.sum(w * s * r ** (-1.0 - params.sp)))

    a1, a2 = annulus(quad.order), annulus(2 * quad.order)

    # far field
    if const_tail is not None and quad.r_tail >= hull_reach:
        far_v = float(j_p(ux - const_tail, params.p)) * sphere_area(d) * quad.r_tail ** (-params.sp) / params.sp
        far_e = 0.0
    else:
        alpha = tail_weight_exponent(params, g)

        def far(n):
            t, wt = gauss_jacobi01(n, alpha)
            R = quad.r_tail
            y = (x[None, None, :] + (R / t)[:, None, None] * dirs[None, :, :]).reshape(-1, d)
            vals = f(y).reshape(len(t), len(dirs))
            s = np.sum(j_p(ux - vals, params.p) * wd, axis=1)
            return float(R ** (-params.sp) * np.sum(wt * s * t ** (params.sp - 1.0 - alpha)))

        f1, f2 = far(32), far(64)
        far_v, far_e = f2, abs(f2 - f1)
        if not np.isfinite(far_v) or far_e > max(quad.tol, 1e-8 * abs(far_v)):
            raise TailError(f"tail remainder {far_e:.3g} exceeds tol {quad.tol:.3g}")

    value = inner_v + a2 + far_v
    error = inner_e + abs(a2 - a1) + far_e
    return Estimate(float(value), float(error))


def pv_local_bound(w: Callable, x, eps: float, params: FracParams, quad: QuadConfig | None = None) -> Estimate:
    """``|P.V. int_{B_eps(x)} J_p(w(x) - w(y)) |x-y|^(-d-sp) dy|`` for smooth ``w``."""
    d = params.d
    x = np.atleast_1d(np.asarray(x, dtype=float)).reshape(d)
    quad = quad or QuadConfig(eps_pv=eps, r_tail=max(2 * eps, 1.0))
    wx = float(np.asarray(w(x[None, :]))[0])

    def incr(z):
        return w(x[None, :] + z) - wx

    dirs, wd = sphere_rule(d, quad.n_dir)
    noise = 2.0 * np.finfo(float).eps * max(abs(wx), 1e-300)
    v, e = _inner_ball(incr, eps, params, quad, quad.inner_rings, dirs, wd, noise)
    return Estimate(float(abs(v)), float(e))


def frac_p_laplacian_grid(u: GridField, params: FracParams, quad: QuadConfig | None = None,
                          method: str = "nodes") -> GridField:
    """Operator on the interior nodes of ``u``'s grid.

    ``method="nodes"`` uses the node-quadrature :class:`NodeOperator` (the
    discretization the time stepper advances).  ``method="pointwise"`` calls
    :func:`frac_p_laplacian_point` at every interior node; nodes closer than
    ``eps_pv + h`` to the box boundary are rejected with their index.
    """
    shape = tuple(n - 2 for n in u.grid.shape)
    if method == "nodes":
        vals = NodeOperator.build(u.grid, params, u.tail).apply(u.values)
    elif method == "pointwise":
        pts = u.grid.nodes()[u.grid.interior_mask().ravel()]
        vals = np.empty(len(pts))
        for k, x in enumerate(pts):
            try:
                vals[k] = frac_p_laplacian_point(u, x, params, quad).value
            except (QuadratureError, TailError) as exc:
                raise type(exc)(f"interior node {np.unravel_index(k, shape)}: {exc}") from exc
    else:
        raise ValueError(f"unknown method {method!r}")
    return GridField(u.grid.interior(), vals.reshape(shape), ZeroExtension())


# ---------------------------------------------------------------------------
# node-quadrature operator
# ---------------------------------------------------------------------------


@lru_cache(maxsize=64)
def _near_weight(d: int, sp: float, p: float) -> float:
    """``1/2 int_{[-1/2,1/2]^d} |z_1|^p |z|^(-d-sp) dz``, via self-similar shells."""
    if d == 1:
        return 0.5 ** (p - sp) / (p - sp)
    # shell [-1/2,1/2]^d minus [-1/4,1/4]^d, split into cubes of side 1/4
    t, w = gauss_legendre(8)
    sub = np.arange(4) * 0.25 - 0.5
    total = 0.0
    for corner in np.ndindex(*(4,) * d):
        lo = sub[list(corner)]
        if np.all((lo >= -0.25 - 1e-12) & (lo + 0.25 <= 0.25 + 1e-12)):
            continue
        mesh = np.meshgrid(*[lo[k] + 0.25 * t for k in range(d)], indexing="ij")
        z = np.stack([m.ravel() for m in mesh], axis=1)
        ww = np.ones(1)
        for _ in range(d):
            ww = np.multiply.outer(ww, 0.25 * w)
        rz = np.linalg.norm(z, axis=1)
        total += float(np.sum(ww.ravel() * np.abs(z[:, 0]) ** p * rz ** (-d - sp)))
    return 0.5 * total / (1.0 - 2.0 ** (-(p - sp)))


def _cell_weights(offsets: np.ndarray, sp: float) -> np.ndarray:
    """``int_{k + [-1/2,1/2]^d} |z|^(-d-sp) dz`` for nonzero integer offsets k."""
    d = offsets.shape[1]
    if d == 1:
        k = np.abs(offsets[:, 0]).astype(float)
        return ((k - 0.5) ** (-sp) - (k + 0.5) ** (-sp)) / sp
    out = np.empty(len(offsets))
    t, w = gauss_legendre(6)
    near = np.max(np.abs(offsets), axis=1) <= 2
    for mask, nsub in ((near, 4), (~near, 1)):
        if not mask.any():
            continue
        ks = offsets[mask].astype(float)
        st = (np.arange(nsub)[:, None] + t[None, :]).ravel() / nsub - 0.5
        sw = np.tile(w, nsub) / nsub
        mesh = np.meshgrid(*([st] * d), indexing="ij")
        z = np.stack([m.ravel() for m in mesh], axis=1)
        ww = np.ones(1)
        for _ in range(d):
            ww = np.multiply.outer(ww, sw)
        ww = ww.ravel()
        vals = []
        for i0 in range(0, len(ks), 2048):
            kk = ks[i0:i0 + 2048]
            r = np.linalg.norm(kk[:, None, :] + z[None, :, :], axis=2)
            vals.append(np.sum(ww[None, :] * r ** (-d - sp), axis=1))
        out[mask] = np.concatenate(vals)
    return out


@dataclass(eq=False)
class NodeOperator:
    """``A_i(u) = sum_j W_ij J_p(u_i - u_j) + sum_q E_iq J_p(u_i - g_iq)``.

    Rows run over interior nodes; columns over all grid nodes (the outer
    layer is frozen exterior data).  Ghost values ``g_iq`` sample the tail on
    rays leaving the cell hull ``[lo - h/2, hi + h/2]``.
    """

    grid: UniformGrid
    params: FracParams
    tail: object
    W: np.ndarray              # (N_int, N_all)
    interior: np.ndarray       # flat indices of interior nodes
    E: np.ndarray              # (N_int, Q)
    G: np.ndarray              # (N_int, Q)
    W_all: np.ndarray = field(repr=False, default=None)  # (N_all, N_all), for energies

    @classmethod
    def build(cls, grid: UniformGrid, params: FracParams, tail=None, n_ghost: int = 24) -> "NodeOperator":
        tail = ZeroExtension() if tail is None else tail
        check_tail(tail, params)
        return _build_cached(grid, params, tail, n_ghost)

    @property
    def n_interior(self) -> int:
        return len(self.interior)

    def _ghost_terms(self, ui: np.ndarray) -> np.ndarray:
        return np.sum(self.E * j_p(ui[:, None] - self.G, self.params.p), axis=1)

    def apply(self, values: np.ndarray) -> np.ndarray:
        """Operator at interior nodes (flat, interior order)."""
        u = np.asarray(values, dtype=float).ravel()
        ui = u[self.interior]
        diff = ui[:, None] - u[None, :]
        return np.sum(self.W * j_p(diff, self.params.p), axis=1) + self._ghost_terms(ui)

    def slope_bound(self, values: np.ndarray, delta: float) -> np.ndarray:
        """Per-row ``sum_j w_ij (p-1)(|u_i - u_j| + delta)^(p-2)`` incl. ghosts."""
        u = np.asarray(values, dtype=float).ravel()
        ui = u[self.interior]
        p = self.params.p
        lam = np.sum(self.W * j_p_prime_bound(ui[:, None] - u[None, :], p, delta), axis=1)
        lam += np.sum(self.E * j_p_prime_bound(ui[:, None] - self.G, p, delta), axis=1)
        return lam

    def seminorm_p(self, values: np.ndarray) -> float:
        """Discrete ``[u]^p`` over (grid cells)^2 plus interior-exterior pairs."""
        u = np.asarray(values, dtype=float).ravel()
        p = self.params.p
        hd = self.grid.h ** self.grid.dim
        pair = np.sum(self.W_all * np.abs(u[:, None] - u[None, :]) ** p)
        ui = u[self.interior]
        cross = np.sum(self.E * np.abs(ui[:, None] - self.G) ** p)
        return float(hd * (pair + 2.0 * cross))

    def energy_form(self, values: np.ndarray, phi_values: np.ndarray) -> float:
        """Discrete energy form for ``phi`` vanishing off the interior nodes."""
        phi = np.asarray(phi_values, dtype=float).ravel()
        hd = self.grid.h ** self.grid.dim
        return float(2.0 * hd * np.dot(phi[self.interior], self.apply(values)))


def _build_cached(grid, params, tail, n_ghost):  # pragma: no cover - thin wrapper
    return _build(grid, params, tail, n_ghost)


@lru_cache(maxsize=16)
def _build(grid: UniformGrid, params: FracParams, tail, n_ghost: int) -> NodeOperator:
    d, sp, p, h = grid.dim, params.sp, params.p, grid.h
    shape = grid.shape
    idx = np.stack(np.meshgrid(*[np.arange(n) for n in shape], indexing="ij"), -1).reshape(-1, d)
    N = len(idx)
    # weights depend only on the offset; tabulate all offsets once
    span = [np.arange(-(n - 1), n) for n in shape]
    offs = np.stack(np.meshgrid(*span, indexing="ij"), -1).reshape(-1, d)
    nz = np.any(offs != 0, axis=1)
    wtab = np.zeros(len(offs))
    wtab[nz] = _cell_weights(offs[nz], sp)
    c_near = _near_weight(d, sp, p)
    axis_nb = (np.sum(np.abs(offs), axis=1) == 1)
    wtab[axis_nb] += c_near
    wtab *= h ** (-sp)
    tab = wtab.reshape([2 * n - 1 for n in shape])

    rel = idx[:, None, :] - idx[None, :, :] + (np.asarray(shape) - 1)
    W_all = tab[tuple(rel[..., k] for k in range(d))]
    np.fill_diagonal(W_all, 0.0)

    interior = np.flatnonzero(grid.interior_mask().ravel())
    W = W_all[interior]

    # exterior: rays from each interior node leaving the cell hull
    xi = grid.nodes()[interior]
    lo_c, hi_c = grid.lo - h / 2, grid.hi + h / 2
    dirs, wd = sphere_rule(d, 64 if d > 1 else 1)
    rho = _exit_distance(xi, dirs, lo_c, hi_c)
    const = tail.constant
    if const is not None:
        E = (np.sum(wd[None, :] * rho ** (-sp), axis=1) / sp)[:, None]
        G = np.full_like(E, const)
    else:
        alpha = tail_weight_exponent(params, tail.growth)
        t, wt = gauss_jacobi01(n_ghost, alpha)
        pts = xi[:, None, None, :] + (rho[:, :, None, None] / t[None, None, :, None]) * dirs[None, :, None, :]
        G = tail.value(pts.reshape(-1, d)).reshape(len(xi), len(dirs) * len(t))
        E = (wd[None, :, None] * rho[:, :, None] ** (-sp) * (wt * t ** (sp - 1.0 - alpha))[None, None, :])
        E = E.reshape(len(xi), -1)
    return NodeOperator(grid, params, tail, W, interior, E, G, W_all)


# ---------------------------------------------------------------------------
# energy form for analytic data
# ---------------------------------------------------------------------------


def energy_form(u, phi, params: FracParams, box, *, exterior: bool = True, order: int = 8,
                growth: float = 0.0) -> Estimate:
    """Double integral of ``J_p(u(x)-u(y)) (phi(x)-phi(y)) |x-y|^(-d-sp)``.

    ``phi`` must vanish outside a compact subset of ``box = (lo, hi)``.  With
    ``exterior=False`` only box x box is integrated (the form restricted to
    the box); otherwise interactions with all of R^d are added.
    """
    from .core import _box_pair_integral

    lo = np.atleast_1d(np.asarray(box[0], dtype=float))
    hi = np.atleast_1d(np.asarray(box[1], dtype=float))
    fu = u.evaluate if isinstance(u, GridField) else u
    p, d = params.p, params.d

    def F(x, y):
        return j_p(fu(x) - fu(y), p) * (phi(x) - phi(y))

    n_dir = 6 if d > 1 else 1

    def interior(n):
        return _box_pair_integral(F, lo, hi, params, n, n, n_dir if n == order else 2 * n_dir)

    def cross(n):
        br = [_graded_breaks(a, b, 10) for a, b in zip(lo, hi)]
        xs, ws = zip(*[panel_rule(b, n) for b in br])
        mesh = np.meshgrid(*xs, indexing="ij")
        X = np.stack([m.ravel() for m in mesh], axis=1)
        WX = np.ones(1)
        for w in ws:
            WX = np.multiply.outer(WX, w)
        WX = WX.ravel()
        ph = phi(X)
        keep = ph != 0
        X, WX, ph = X[keep], WX[keep], ph[keep]
        if len(X) == 0:
            return 0.0
        dirs, wd = sphere_rule(d, 2 * n_dir if d > 1 else 1)
        rho = _exit_distance(X, dirs, lo, hi)
        alpha = tail_weight_exponent(params, growth)
        t, wt = gauss_jacobi01(2 * n, alpha)
        y = X[:, None, None, :] + (rho[:, :, None, None] / t[None, None, :, None]) * dirs[None, :, None, :]
        uy = fu(y.reshape(-1, d)).reshape(y.shape[:-1])
        ux = fu(X)
        inner = np.sum(wt * j_p(ux[:, None, None] - uy, p) * t ** (params.sp - 1.0 - alpha), axis=2)
        ray = np.sum(wd[None, :] * rho ** (-params.sp) * inner, axis=1)
        return float(2.0 * np.sum(WX * ph * ray))

    v1, v2 = interior(order), interior(2 * order)
    if exterior:
        c1, c2 = cross(order), cross(2 * order)
    else:
        c1 = c2 = 0.0
    return Estimate(v2 + c2, abs(v2 - v1) + abs(c2 - c1))


# ---------------------------------------------------------------------------
# continuity of the operator on quadratic patches
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuadraticPatch:
    """``b0 + b (t - t0) + q.(x - x0) + 1/2 (x - x0).M (x - x0)`` on a cylinder."""

    b0: float
    b: float
    q: tuple
    M: tuple

    def value(self, x: np.ndarray, t: float, cyl: ParabolicCylinder) -> np.ndarray:
        y = x - np.asarray(cyl.center)
        q = np.asarray(self.q, float)
        M = np.asarray(self.M, float).reshape(len(q), len(q))
        return self.b0 + self.b * (t - cyl.t0) + y @ q + 0.5 * np.einsum("ni,ij,nj->n", y, M, y)

    def increment(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """``phi(x, t) - phi(y, t)`` (independent of t)."""
        q = np.asarray(self.q, float)
        M = np.asarray(self.M, float).reshape(len(q), len(q))
        return (x - y) @ q + 0.5 * (np.einsum("ni,ij,nj->n", x, M, x) - np.einsum("ni,ij,nj->n", y, M, y))


@dataclass(frozen=True)
class ScaledTail:
    """Tail family ``lam(t) * base`` (continuous in t under the tail norm)."""

    base: object
    lam: Callable = lambda t: 1.0

    def at(self, t: float):
        return self.base.scaled(float(self.lam(t)))


@dataclass
class ContinuityReport:
    xs: np.ndarray
    ts: np.ndarray
    values: np.ndarray            # (nt, nx), total operator
    local: np.ndarray             # contribution from inside the patch ball
    nonlocal_: np.ndarray
    local_time_jump: float
    nonlocal_time_jump: float
    time_jump: float
    space_jump: float
    finite: bool


def continuity_scan(patch: QuadraticPatch, tail, cyl: ParabolicCylinder, params: FracParams,
                    *, nx: int = 9, nt: int = 5, quad: QuadConfig | None = None) -> ContinuityReport:
    """Sample ``(-Delta_p)^s phi`` over a cylinder for a patched quadratic.

    ``phi`` is the patch on ``B_r(x0)`` and the (possibly time dependent)
    tail elsewhere.  The contribution from inside the ball is computed from
    exact patch increments, so it is identical across times by construction;
    the report separates it from the exterior part.
    """
    d = params.d
    family = tail if isinstance(tail, ScaledTail) else ScaledTail(tail)
    x0 = np.asarray(cyl.center, float)
    r = cyl.r
    quad = quad or QuadConfig(eps_pv=r / 8, r_tail=64.0 * r + float(np.max(np.abs(x0))))
    # sample along the first axis inside B_{r/2}
    s = np.linspace(-r / 2, r / 2, nx)
    xs = np.tile(x0, (nx, 1))
    xs[:, 0] += s
    ts = np.linspace(cyl.t_start + 1e-9 * r**2, cyl.t0, nt)
    dirs, wd = sphere_rule(d, quad.n_dir)
    loc = np.zeros((nt, nx))
    far = np.zeros((nt, nx))
    for i, x in enumerate(xs):
        # exit radius of the patch ball along each direction
        y0 = x - x0
        bq = dirs @ y0
        R_exit = -bq + np.sqrt(bq**2 - (y0 @ y0 - r * r))
        eps = min(quad.eps_pv, 0.5 * float(np.min(R_exit)))

        def incr(z, x=x):
            return -patch.increment(np.broadcast_to(x, z.shape), x + z)

        depth = quad.inner_rings
        v_in, _ = _inner_ball(incr, eps, params, quad, depth, dirs, wd)
        # from eps to the patch boundary, per direction
        t_gl, w_gl = gauss_legendre(2 * quad.order)
        panels = 8
        acc = 0.0
        for j in range(panels):
            a = eps * (R_exit / eps) ** (j / panels)
            b = eps * (R_exit / eps) ** ((j + 1) / panels)
            rr = a[:, None] + (b - a)[:, None] * t_gl[None, :]
            ww = (b - a)[:, None] * w_gl[None, :]
            yy = x[None, None, :] + rr[..., None] * dirs[:, None, :]
            inc = patch.increment(np.broadcast_to(x, yy.shape).reshape(-1, d), yy.reshape(-1, d)).reshape(rr.shape)
            acc += float(np.sum(wd[:, None] * ww * j_p(inc, params.p) * rr ** (-1.0 - params.sp)))
        loc[:, i] = v_in + acc
        for k, t in enumerate(ts):
            tl = family.at(t)
            phix = float(patch.value(x[None, :], t, cyl)[0])
            alpha = tail_weight_exponent(params, tl.growth)
            tt, wt = gauss_jacobi01(48, alpha)
            # rays from x leaving the ball, r in (R_exit, inf) via r = R_exit / t
            yy = x[None, None, :] + (R_exit[:, None, None] / tt[None, :, None]) * dirs[:, None, :]
            gv = tl.value(yy.reshape(-1, d)).reshape(len(dirs), len(tt))
            far[k, i] = float(np.sum(wd[:, None] * R_exit[:, None] ** (-params.sp) * wt[None, :]
                                     * j_p(phix - gv, params.p) * tt[None, :] ** (params.sp - 1.0 - alpha)))
    vals = loc + far
    finite = bool(np.all(np.isfinite(vals)))
    lt = float(np.max(np.abs(np.diff(loc, axis=0)))) if nt > 1 else 0.0
    ft = float(np.max(np.abs(np.diff(far, axis=0)))) if nt > 1 else 0.0
    tj = float(np.max(np.abs(np.diff(vals, axis=0)))) if nt > 1 else 0.0
    sj = float(np.max(np.abs(np.diff(vals, axis=1)))) if nx > 1 else 0.0
    return ContinuityReport(xs, ts, vals, loc, far, lt, ft, tj, sj, finite)

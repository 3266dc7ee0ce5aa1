"""Barrier ``Psi_eta = eta + L0 (t - t0) + L1 |x|^gamma`` for time regularity.

``verify_supersolution`` evaluates ``d/dt Psi + (-Delta_p)^s v`` where v is
the barrier on B_1 and the recentred data ``u - u(0, t0)`` outside, split
into the local part over B_1 and the exterior part.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import FracParams, GridField, SpaceTimeField, j_p, tail_weight_exponent
from .operator import QuadConfig, frac_p_laplacian_point
from .quadrature import gauss_jacobi01, gauss_legendre, sphere_rule


def barrier_gamma(params: FracParams) -> float:
    return params.gamma_barrier


def barrier_eval(x, t, *, eta: float, L0: float, L1: float, gamma: float, t0: float):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return eta + L0 * (np.asarray(t, dtype=float) - t0) + L1 * np.linalg.norm(x, axis=1) ** gamma


def eta_optimize(c: float, gamma: float, p: float) -> float:
    """Minimizer of ``eta + c eta^((1-gamma)(p-1))`` over eta >= 0."""
    if c <= 0:
        raise ValueError("c must be positive")
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    if gamma == 1.0:
        return 0.0
    k = (gamma - 1.0) * (p - 1.0)
    return (c * k) ** (1.0 / (k + 1.0))


def predicted_alpha(params: FracParams) -> tuple[float, str]:
    if params.q_c > 0:
        return 1.0, "Lipschitz-in-time"
    return params.alpha_predicted, "strict upper bound"


def exponent_from_gamma(gamma: float, p: float) -> float:
    """Time exponent ``1 / (1 + (p-1)(gamma-1))`` delivered by the eta optimization."""
    return 1.0 / (1.0 + (p - 1.0) * (gamma - 1.0))


def local_bound_gamma1(params: FracParams, xbar: float, L1: float = 1.0) -> float:
    """Closed bound for ``|L_1|`` when gamma = 1, d = 1 and ``(p-1) > sp``:
    ``L1^(p-1) int_{-1}^{1} |x - xbar|^(p-2-sp) dx``."""
    e = params.p - 1.0 - params.sp
    if e <= 0:
        raise ValueError("bound needs p - 1 > sp (q_c > 0 with p = 2 means s < 1/2)")
    return L1 ** (params.p - 1.0) * ((1 + xbar) ** e + (1 - xbar) ** e) / e


@dataclass
class SampleBreakdown:
    x: np.ndarray
    t: float
    dt_psi: float
    local: float
    exterior: float
    error: float

    @property
    def total(self) -> float:
        return self.dt_psi + self.local + self.exterior


@dataclass
class SupersolutionReport:
    minimum: float
    error: float
    argmin: tuple
    samples: list = field(default_factory=list)
    L0: float = 0.0

    @property
    def certified(self) -> bool:
        """Minimum positive with its error bar excluding zero."""
        return self.minimum - self.error > 0


def _local_part(params, xbar, L1, gamma, quad_tol):
    """``L1^(p-1) P.V. int_{B_1} J_p(phi(xbar) - phi(x)) |x - xbar|^(-d-sp)``, phi = |x|^gamma.

    Outside B_1 the integrand is given the value at xbar, so the full-space
    operator of that extension equals the local integral."""
    d = params.d
    nb = float(np.linalg.norm(xbar))
    fx = nb**gamma

    def w(y):
        r = np.linalg.norm(y, axis=1)
        return np.where(r < 1.0, r**gamma, fx)

    eps = min(0.05, 0.25 * nb) if nb > 0 else 0.05
    quad = QuadConfig(eps_pv=eps, ring_count=48, tol=quad_tol, r_tail=4.0, order=10, n_dir=24)
    brk = [np.zeros(d)]
    if d == 1:
        brk += [np.array([-1.0]), np.array([1.0])]
    est = frac_p_laplacian_point(w, xbar, params, quad, breakpoints=brk)
    return L1 ** (params.p - 1.0) * est.value, L1 ** (params.p - 1.0) * est.error


def _exterior_part(params, xbar, psi_bar, slice_field: GridField, u00: float, n: int):
    """``int_{|x|>1} J_p(psi_bar - (u(x) - u00)) |x - xbar|^(-d-sp) dx`` along rays."""
    d, sp, p = params.d, params.sp, params.p
    dirs, wd = sphere_rule(d, 24)
    b = dirs @ xbar
    rho = -b + np.sqrt(b * b + 1.0 - xbar @ xbar)
    grid = slice_field.grid
    corners = np.stack(np.meshgrid(*[[a, c] for a, c in zip(grid.lo, grid.hi)], indexing="ij"), -1).reshape(-1, d)
    reach = float(np.max(np.linalg.norm(corners - xbar, axis=1))) * 1.01
    reach = max(reach, float(np.max(rho)) * 1.01)
    t, wt = gauss_legendre(n)
    total = 0.0
    for k, th in enumerate(dirs):
        # panels from the unit sphere to the box reach with node breaks in 1D
        brk = [rho[k], reach]
        if d == 1:
            nodes = (grid.axes[0] - xbar[0]) * th[0]
            brk += [v for v in nodes if rho[k] < v < reach]
        brk = np.unique(np.asarray(brk))
        L = np.diff(brk)[:, None]
        r = (brk[:-1, None] + L * t).ravel()
        wr = (L * wt).ravel()
        y = xbar[None, :] + r[:, None] * th[None, :]
        f = j_p(psi_bar - (slice_field.evaluate(y) - u00), p) * r ** (-1.0 - sp)
        total += wd[k] * float(np.sum(wr * f))
        # beyond the box: tail values, r = reach / tau
        alpha = tail_weight_exponent(params, slice_field.tail.growth)
        tj, wj = gauss_jacobi01(n, alpha)
        y = xbar[None, :] + (reach / tj)[:, None] * th[None, :]
        f = j_p(psi_bar - (slice_field.evaluate(y) - u00), p) * tj ** (sp - 1.0 - alpha)
        total += wd[k] * reach ** (-sp) * float(np.sum(wj * f))
    return total


def verify_supersolution(params: FracParams, u: SpaceTimeField, *, eta: float, L1: float, C_claim: float,
                         t0: float | None = None, n_x: int = 9, n_t: int = 4, h_exclude: float | None = None,
                         quad_tol: float = 1e-8, L0: float | None = None) -> SupersolutionReport:
    """Sampled minimum of ``d/dt Psi + (-Delta_p)^s v`` on ``B_{1/2} x (t0, t_end]``.

    ``L0 = C_claim * L1^(p-1)`` unless given explicitly.  Sample points avoid the ball of radius
    ``h_exclude`` (default: the grid spacing) around the kink of ``|x|^gamma``;
    time samples are trajectory slices strictly after ``t0``.
    """
    gamma = barrier_gamma(params)
    L0 = C_claim * L1 ** (params.p - 1.0) if L0 is None else L0
    d = params.d
    times = np.asarray(u.times)
    t0 = float(times[0]) if t0 is None else t0
    h = u.grid.h if h_exclude is None else h_exclude
    # u(0, t0) from the slice at (or interpolated to) t0
    k0 = int(np.argmin(np.abs(times - t0)))
    u00 = float(u.slice(k0).evaluate(np.zeros((1, d)))[0])
    later = np.flatnonzero(times > t0 + 1e-14)
    if len(later) == 0:
        raise ValueError("no trajectory slices after t0")
    pick = later[np.unique(np.linspace(0, len(later) - 1, n_t).round().astype(int))]
    if d == 1:
        xs = np.linspace(-0.5, 0.5, 2 * n_x + 1)[1:-1]
        xs = xs[np.abs(xs) >= h - 1e-12][:, None]
    else:
        g = np.linspace(-0.5, 0.5, n_x + 2)[1:-1]
        xs = np.stack(np.meshgrid(*([g] * d), indexing="ij"), -1).reshape(-1, d)
        r = np.linalg.norm(xs, axis=1)
        xs = xs[(r < 0.5) & (r >= h)]
    local_cache = {}
    samples = []
    for x in xs:
        key = tuple(np.round(x, 14))
        if key not in local_cache:
            local_cache[key] = _local_part(params, x, L1, gamma, quad_tol)
        loc, loc_err = local_cache[key]
        for k in pick:
            t = float(times[k])
            psi_bar = float(barrier_eval(x, t, eta=eta, L0=L0, L1=L1, gamma=gamma, t0=t0)[0])
            sl = u.slice(int(k))
            e1 = _exterior_part(params, x, psi_bar, sl, u00, 12)
            e2 = _exterior_part(params, x, psi_bar, sl, u00, 24)
            samples.append(SampleBreakdown(x.copy(), t, L0, loc, e2, loc_err + abs(e2 - e1)))
    j = int(np.argmin([s.total for s in samples]))
    best = samples[j]
    return SupersolutionReport(best.total, best.error, (best.x, best.t), samples, L0)


def threshold_search(params: FracParams, u: SpaceTimeField, *, eta: float, L1: float, c_start: float = 1e-3,
                     max_doublings: int = 40, **kw) -> tuple[float, SupersolutionReport]:
    """Smallest ``C_claim`` in the doubling sequence from ``c_start`` whose
    sampled minimum is certified positive."""
    C = c_start
    for _ in range(max_doublings):
        rep = verify_supersolution(params, u, eta=eta, L1=L1, C_claim=C, **kw)
        if rep.certified:
            return C, rep
        C *= 2.0
    raise RuntimeError("no positive threshold found in the doubling search")


def choose_L1(eta: float, lip: float, gamma: float) -> float:
    """``L1 >= max(2^(1+gamma), C (eta/C)^(1-gamma))`` with C the spatial Lipschitz bound."""
    lip = max(lip, 1e-12)
    return max(2.0 ** (1.0 + gamma), lip * (eta / lip) ** (1.0 - gamma)) if eta > 0 else 2.0 ** (1.0 + gamma)

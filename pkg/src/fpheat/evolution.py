"""Monotone explicit time stepping for ``u_t + (-Delta_p)^s u = 0``.

The outer node layer of the grid and the tail are frozen exterior data; only
interior nodes evolve.  With ``dt <= c_mon / max_i Lambda_i`` the forward
Euler update is nondecreasing in every input value, which is the discrete
form of the comparison principle, and it decreases the discrete energy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import FracParams, GridField, SpaceTimeField
from .operator import NodeOperator, QuadConfig

C_MON = 0.9
BLOWUP_FACTOR = 1e3


class EvolutionError(RuntimeError):
    """Raised by the blow-up guard or when a step violates the dt bound."""


@dataclass(frozen=True)
class EvolveControls:
    """Time stepping controls.

    ``delta`` is the oscillation floor in the step bound; ``None`` means
    ``1e-8 * osc(u0)`` (or ``1e-8`` for constant data).
    """

    t_end: float
    dt_max: float = 1e-3
    dt_policy: str = "adaptive-monotone"
    delta: float | None = None
    save_every: int = 1

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if not self.dt_max > 0:
            raise ValueError("dt_max must be positive")
        if self.dt_policy not in ("fixed", "adaptive-monotone"):
            raise ValueError(f"unknown dt_policy {self.dt_policy!r}")
        if self.delta is not None and not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.save_every < 1:
            raise ValueError("save_every must be >= 1")


def default_delta(u: GridField) -> float:
    osc = u.oscillation()
    return 1e-8 * osc if osc > 0 else 1e-8


def _operator(u: GridField, params: FracParams) -> NodeOperator:
    return NodeOperator.build(u.grid, params, u.tail)


def stable_dt(u: GridField, params: FracParams, quad: QuadConfig | None = None,
              delta: float | None = None) -> float:
    """Largest step keeping the explicit update order preserving, times c_mon."""
    delta = default_delta(u) if delta is None else delta
    lam = _operator(u, params).slope_bound(u.values, delta)
    top = float(np.max(lam))
    return C_MON / top if top > 0 else np.inf


def _update(op: NodeOperator, values: np.ndarray, dt: float) -> np.ndarray:
    u = values.ravel().copy()
    u[op.interior] = u[op.interior] - dt * op.apply(values)
    return u.reshape(values.shape)


def step_explicit(u: GridField, dt: float, params: FracParams, quad: QuadConfig | None = None,
                  delta: float | None = None) -> GridField:
    """One forward Euler step; refuses ``dt`` above the monotone bound."""
    bound = stable_dt(u, params, quad, delta)
    if dt > bound:
        raise EvolutionError(f"dt={dt:.6g} exceeds the monotone bound {bound:.6g}")
    return u.with_values(_update(_operator(u, params), u.values, dt))


def evolve(u0: GridField, controls: EvolveControls, params: FracParams, quad: QuadConfig | None = None,
           callback: Callable | None = None) -> SpaceTimeField:
    """Trajectory from ``u0`` up to ``controls.t_end``.

    Under the fixed policy every step uses ``dt_max`` (which must satisfy the
    bound at each step); the adaptive policy takes ``min(dt_max, stable_dt)``.
    """
    op = _operator(u0, params)
    delta = default_delta(u0) if controls.delta is None else controls.delta
    sup0 = max(u0.sup_norm(), 1e-300)
    vals = np.array(u0.values, dtype=float)
    t = 0.0
    times, slices = [0.0], [vals.copy()]
    k = 0
    while t < controls.t_end * (1 - 1e-12):
        lam = float(np.max(op.slope_bound(vals, delta)))
        bound = C_MON / lam if lam > 0 else np.inf
        if controls.dt_policy == "fixed":
            dt = controls.dt_max
            if dt > bound:
                raise EvolutionError(f"fixed dt={dt:.6g} exceeds the monotone bound {bound:.6g} at t={t:.6g}")
        else:
            dt = min(controls.dt_max, bound)
        dt = min(dt, controls.t_end - t)
        vals = _update(op, vals, dt)
        t += dt
        k += 1
        top = float(np.max(np.abs(vals)))
        if not np.isfinite(top) or top > BLOWUP_FACTOR * sup0 and top > 0:
            raise EvolutionError(f"blow-up guard: sup={top:.4g} > {BLOWUP_FACTOR:g} x initial sup {sup0:.4g} at t={t:.6g}, step {k}")
        if callback is not None:
            callback(t, dt, vals)
        if k % controls.save_every == 0 or t >= controls.t_end * (1 - 1e-12):
            times.append(t)
            slices.append(vals.copy())
    return SpaceTimeField(u0.grid, np.asarray(times), np.stack(slices), u0.tail)


def discrete_energy(u: GridField, params: FracParams) -> float:
    """``(1/p) [u]^p`` in the node quadrature over the extended truncation."""
    return _operator(u, params).seminorm_p(u.values) / params.p


@dataclass
class EnergyTrace:
    times: np.ndarray
    energy: np.ndarray
    max_increase: float
    tolerance: float
    dissipative: bool

    def rows(self):
        return list(zip(self.times.tolist(), self.energy.tolist()))


def energy_trace(traj: SpaceTimeField, params: FracParams, rel_tol: float = 1e-6) -> EnergyTrace:
    """Energy along a trajectory; flags any increase above ``rel_tol * F(u0)``."""
    op = NodeOperator.build(traj.grid, params, traj.tail)
    F = np.array([op.seminorm_p(v) / params.p for v in traj.values])
    inc = float(np.max(np.diff(F))) if len(F) > 1 else 0.0
    tol = rel_tol * abs(F[0])
    return EnergyTrace(np.asarray(traj.times), F, inc, tol, bool(inc <= tol))


def energy_step_oracle(u0: GridField, u1: GridField, dt: float, params: FracParams) -> float:
    """First-order prediction of ``F(u1) - F(u0)`` for one Euler step.

    The gradient of the discrete energy at interior node i is ``2 h^d A_i``,
    so a step ``u1 - u0 = -dt A`` changes F by ``-2 h^d dt sum A_i^2`` up to
    O(dt^2)."""
    op = _operator(u0, params)
    inc = (u1.values.ravel() - u0.values.ravel())[op.interior] / dt
    return float(-2.0 * u0.grid.h ** u0.grid.dim * dt * np.sum(inc**2))


def weak_residual(traj: SpaceTimeField, phi: Callable, params: FracParams, *, window=None) -> float:
    """Discrete weak-form residual of a trajectory against a test function.

    ``phi(pts, t)`` must vanish on the frozen outer node layer.  Computes
    ``int u phi |_{t_a}^{t_b} - int int u phi_t + int 1/2 E(u, phi)`` with
    node sums in space and the trapezoid rule in time.  The factor 1/2 turns
    the symmetric double-integral form into ``int phi (-Delta_p)^s u``.
    """
    grid = traj.grid
    op = NodeOperator.build(grid, params, traj.tail)
    pts = grid.nodes()
    times = np.asarray(traj.times)
    if window is not None:
        keep = (times >= window[0] - 1e-14) & (times <= window[1] + 1e-14)
    else:
        keep = np.ones(len(times), dtype=bool)
    ts = times[keep]
    U = traj.values[keep].reshape(len(ts), -1)
    if len(ts) < 2:
        raise ValueError("need at least two time samples in the window")
    hd = grid.h ** grid.dim
    Phi = np.stack([np.asarray(phi(pts, t), dtype=float) for t in ts])
    boundary = ~grid.interior_mask().ravel()
    if np.any(np.abs(Phi[:, boundary]) > 0):
        raise ValueError("test function support leaks outside the interior nodes")
    if not np.any(Phi):
        return 0.0
    # phi_t by the same differences the trajectory uses, so constants cancel exactly
    dphi = np.diff(Phi, axis=0) / np.diff(ts)[:, None]
    mid_u = 0.5 * (U[1:] + U[:-1])
    time_term = float(np.sum(np.diff(ts)[:, None] * mid_u * dphi) * hd)
    ends = float(hd * (U[-1] @ Phi[-1] - U[0] @ Phi[0]))
    e = np.array([hd * Phi[k, op.interior] @ op.apply(U[k]) for k in range(len(ts))])
    energy = float(np.sum(0.5 * np.diff(ts) * (e[1:] + e[:-1])))
    return ends - time_term + energy

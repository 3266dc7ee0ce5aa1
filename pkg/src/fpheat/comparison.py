"""Discrete comparison: ordered data evolved with a common monotone step."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import AnalyticTail, ConstantExtension, FracParams, GridField, UniformGrid, ZeroExtension
from .evolution import C_MON, EvolveControls, default_delta
from .operator import NodeOperator, QuadConfig


class OrderError(ValueError):
    """The pair is not ordered at the initial time or on the exterior."""


def _tail_dominates(upper, lower, probe: np.ndarray) -> bool:
    return bool(np.all(upper.value(probe) >= lower.value(probe)))


@dataclass(frozen=True)
class OrderedPair:
    """Initial data with ``upper >= lower`` on the grid and on the tail."""

    upper: GridField
    lower: GridField

    def __post_init__(self):
        if not self.upper.grid.same_as(self.lower.grid):
            raise OrderError("pair members must share the grid")
        bad = np.argwhere(self.lower.values > self.upper.values)
        if len(bad):
            i = tuple(int(k) for k in bad[0])
            raise OrderError(
                f"pair not ordered at node {i}: lower={self.lower.values[i]:.6g} > upper={self.upper.values[i]:.6g}"
            )
        g = self.upper.grid
        d = g.dim
        rng = np.random.default_rng(0)
        dirs = rng.normal(size=(64, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        reach = float(np.max(np.abs(g.hi - g.lo)))
        probe = np.concatenate([g.center + dirs * reach * r for r in (1.0, 2.0, 8.0, 64.0)])
        if not _tail_dominates(self.upper.tail, self.lower.tail, probe):
            raise OrderError("pair not ordered on the exterior: lower tail exceeds upper tail")


@dataclass
class ViolationReport:
    count: int
    steps: int
    final_time: float
    min_gap: float
    violations: list = field(default_factory=list)  # (step, t, node, lower - upper)
    energy_upper: np.ndarray | None = None
    energy_lower: np.ndarray | None = None

    def energy_increase(self) -> float:
        """Largest per-step energy increase relative to the initial energy of either member."""
        worst = -np.inf
        for F in (self.energy_upper, self.energy_lower):
            if F is None or len(F) < 2:
                continue
            worst = max(worst, float(np.max(np.diff(F))) / max(abs(F[0]), 1e-300))
        return worst

    @property
    def ok(self) -> bool:
        return self.count == 0


def _lockstep(pair: OrderedPair, controls: EvolveControls, params: FracParams, on_step):
    g = pair.upper.grid
    op_u = NodeOperator.build(g, params, pair.upper.tail)
    op_l = NodeOperator.build(g, params, pair.lower.tail)
    du = default_delta(pair.upper) if controls.delta is None else controls.delta
    dl = default_delta(pair.lower) if controls.delta is None else controls.delta
    U = pair.upper.values.ravel().copy()
    V = pair.lower.values.ravel().copy()
    t, k = 0.0, 0
    on_step(k, t, U, V)
    while t < controls.t_end * (1 - 1e-12):
        lam = max(float(np.max(op_u.slope_bound(U, du))), float(np.max(op_l.slope_bound(V, dl))))
        bound = C_MON / lam if lam > 0 else np.inf
        dt = controls.dt_max if controls.dt_policy == "fixed" else min(controls.dt_max, bound)
        if dt > bound:
            raise ValueError(f"fixed dt={dt:.6g} exceeds the common monotone bound {bound:.6g}")
        dt = min(dt, controls.t_end - t)
        au, av = op_u.apply(U), op_l.apply(V)
        U[op_u.interior] -= dt * au
        V[op_l.interior] -= dt * av
        t += dt
        k += 1
        on_step(k, t, U, V)
    return k, t


def check_comparison(pair: OrderedPair, controls: EvolveControls, params: FracParams,
                     quad: QuadConfig | None = None) -> ViolationReport:
    """Evolve both members with the common (minimum) monotone dt and count
    every node-time where lower exceeds upper. Exact comparison, no tolerance."""
    shape = pair.upper.grid.shape
    found = []
    gaps = []
    op_u = NodeOperator.build(pair.upper.grid, params, pair.upper.tail)
    op_l = NodeOperator.build(pair.lower.grid, params, pair.lower.tail)
    Fu, Fl = [], []

    def on_step(k, t, U, V):
        diff = V - U
        gaps.append(float(np.min(-diff)))
        Fu.append(op_u.seminorm_p(U) / params.p)
        Fl.append(op_l.seminorm_p(V) / params.p)
        for j in np.flatnonzero(diff > 0):
            found.append((k, t, tuple(int(i) for i in np.unravel_index(j, shape)), float(diff[j])))

    steps, tf = _lockstep(pair, controls, params, on_step)
    return ViolationReport(len(found), steps, tf, min(gaps), found, np.asarray(Fu), np.asarray(Fl))


def ordering_gap_trace(pair: OrderedPair, controls: EvolveControls, params: FracParams,
                       quad: QuadConfig | None = None) -> list:
    """``(t, min_i (upper_i - lower_i))`` at every step."""
    out = []
    _lockstep(pair, controls, params, lambda k, t, U, V: out.append((t, float(np.min(U - V)))))
    return out


def random_bump(grid: UniformGrid, rng: np.random.Generator, max_bumps: int = 3) -> np.ndarray:
    """Nonnegative sum of tent/cosine bumps supported inside the interior."""
    x = grid.nodes()
    out = np.zeros(len(x))
    lo, hi = grid.lo + grid.h, grid.hi - grid.h
    for _ in range(int(rng.integers(1, max_bumps + 1))):
        c = rng.uniform(lo, hi)
        w = rng.uniform(0.1, 0.5) * float(np.min(hi - lo))
        a = rng.uniform(0.1, 1.0)
        r = np.linalg.norm(x - c, axis=1) / w
        out += a * np.where(r < 1, np.cos(0.5 * np.pi * r) ** 2, 0.0)
    out[~grid.interior_mask().ravel()] = 0.0
    return out.reshape(grid.shape)


def random_ordered_pair(grid: UniformGrid, rng: np.random.Generator, tail=None) -> OrderedPair:
    """``lower = upper - bump`` with both sharing the tail."""
    tail = ZeroExtension() if tail is None else tail
    up = random_bump(grid, rng) - 0.5 * random_bump(grid, rng)
    low = up - random_bump(grid, rng)
    return OrderedPair(GridField(grid, up, tail), GridField(grid, low, tail))

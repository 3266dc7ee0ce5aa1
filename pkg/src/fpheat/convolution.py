"""Parabolic inf/sup-convolutions on sampled space-time data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SpaceTimeField


def inf_convolution(u: SpaceTimeField, eps: float) -> SpaceTimeField:
    """``u_eps(x,t) = min_{(y,tau)} u(y,tau) + (|y-x|^2 + |t-tau|)/eps`` over samples.

    Only samples with ``|y-x|^2 + |t-tau| <= 2 eps osc(u)`` can beat the
    sample at (x, t) itself, so the search window is pruned to that radius.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    g = u.grid
    V = u.values.reshape(len(u.times), -1)
    X = g.nodes()
    T = np.asarray(u.times)
    osc = float(V.max() - V.min())
    reach = 2.0 * eps * osc
    out = V.copy()
    if reach <= 0:
        return SpaceTimeField(g, T, out.reshape(u.values.shape), u.tail)
    # axis-aligned index window containing the pruning ball
    r_idx = int(np.floor(np.sqrt(reach) / g.h + 1e-9))
    shape = g.shape
    grid_idx = np.stack(np.unravel_index(np.arange(len(X)), shape), axis=1)
    offs = np.stack(np.meshgrid(*[np.arange(-r_idx, r_idx + 1)] * g.dim, indexing="ij"), -1).reshape(-1, g.dim)
    dist2 = np.sum((offs * g.h) ** 2, axis=1)
    offs, dist2 = offs[dist2 <= reach + 1e-12], dist2[dist2 <= reach + 1e-12]
    for k, t in enumerate(T):
        dtau = np.abs(T - t)
        tk = np.flatnonzero(dtau <= reach + 1e-12)
        best = out[k].copy()
        for o, d2 in zip(offs, dist2):
            nb = grid_idx + o
            ok = np.all((nb >= 0) & (nb < np.asarray(shape)), axis=1)
            src = np.ravel_multi_index(tuple(nb[ok].T), shape)
            for j in tk:
                if d2 + dtau[j] > reach + 1e-12:
                    continue
                best[ok] = np.minimum(best[ok], V[j, src] + (d2 + dtau[j]) / eps)
        out[k] = best
    return SpaceTimeField(g, T, out.reshape(u.values.shape), u.tail)


def sup_convolution(u: SpaceTimeField, eps: float) -> SpaceTimeField:
    """``u^eps = -(-u)_eps``."""
    neg = SpaceTimeField(u.grid, u.times, -u.values, u.tail)
    w = inf_convolution(neg, eps)
    return SpaceTimeField(u.grid, u.times, -w.values, u.tail)


@dataclass(frozen=True)
class ShrunkDomain:
    """``Omega_eps x (t_start, t2]`` with ``Omega_eps = {x : B_rho(x) in Omega}``."""

    lo: tuple
    hi: tuple
    t_start: float
    rho: float

    def contains(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.all((x > np.asarray(self.lo)) & (x < np.asarray(self.hi)), axis=1)


def shrunk_domain(omega, t1: float, eps: float, sup_norm: float) -> ShrunkDomain:
    """Box ``omega = (lo, hi)`` shrunk by ``rho = 2 eps sup_norm``; the time
    window starts at ``t1 + rho``."""
    lo = np.atleast_1d(np.asarray(omega[0], dtype=float))
    hi = np.atleast_1d(np.asarray(omega[1], dtype=float))
    rho = 2.0 * eps * sup_norm
    nlo, nhi = lo + rho, hi - rho
    if np.any(nlo >= nhi):
        raise ValueError("empty shrunk domain")
    return ShrunkDomain(tuple(nlo.tolist()), tuple(nhi.tolist()), t1 + rho, rho)

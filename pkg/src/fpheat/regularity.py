"""Empirical space and time regularity of trajectories."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import FracParams, GridField, SpaceTimeField, tail_norm
from .barrier import predicted_alpha


class NoSignalError(ValueError):
    pass


def _region_mask(grid, region) -> np.ndarray:
    X = grid.nodes()
    if region is None:
        return np.ones(len(X), dtype=bool)
    lo = np.atleast_1d(np.asarray(region[0], dtype=float))
    hi = np.atleast_1d(np.asarray(region[1], dtype=float))
    tol = 1e-12 * max(1.0, float(np.max(np.abs(grid.hi))))
    return np.all((X >= lo - tol) & (X <= hi + tol), axis=1)


def _fit(logx, logy):
    A = np.stack([logx, np.ones_like(logx)], axis=1)
    coef, *_ = np.linalg.lstsq(A, logy, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((logy - pred) ** 2))
    ss_tot = float(np.sum((logy - np.mean(logy)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), float(np.exp(coef[1])), r2


@dataclass
class SpatialEstimate:
    lipschitz: float
    kappa: float
    prefactor: float
    r2: float
    separations: np.ndarray = field(repr=False, default=None)
    moduli: np.ndarray = field(repr=False, default=None)


def spatial_lipschitz_estimate(u: GridField, region=None) -> SpatialEstimate:
    """Max difference quotient over node pairs in ``region = (lo, hi)`` and a
    Holder fit of ``max |u(x) - u(x + k h e_i)|`` against ``k h`` over dyadic k
    up to a quarter of the region width (longer pairs are cut off by the
    region edge and flatten the fit)."""
    g = u.grid
    mask = _region_mask(g, region)
    if mask.sum() < 2:
        raise ValueError("region contains fewer than 2 nodes")
    X = g.nodes()[mask]
    v = u.values.ravel()[mask]
    dist = np.linalg.norm(X[:, None, :] - X[None, :, :], axis=2)
    np.fill_diagonal(dist, np.inf)
    L = float(np.max(np.abs(v[:, None] - v[None, :]) / dist))
    # dyadic separations along the axes inside the region
    sub = np.where(mask.reshape(g.shape), u.values, np.nan)
    n_min = min(int(np.sum(np.any(mask.reshape(g.shape), axis=tuple(j for j in range(g.dim) if j != i)))) for i in range(g.dim))
    ks, mods = [], []
    k = 1
    while k <= max(n_min // 4, 2):
        m = 0.0
        for ax in range(g.dim):
            a = np.take(sub, range(k, sub.shape[ax]), axis=ax)
            b = np.take(sub, range(0, sub.shape[ax] - k), axis=ax)
            dv = np.abs(a - b)
            if np.any(np.isfinite(dv)):
                m = max(m, float(np.nanmax(dv)))
        ks.append(k)
        mods.append(m)
        k *= 2
    ks = np.asarray(ks, dtype=float) * g.h
    mods = np.asarray(mods)
    use = slice(1, None) if len(ks) > 3 else slice(None)
    kk, mm = ks[use], mods[use]
    good = mm > 0
    if good.sum() >= 2:
        kappa, pref, r2 = _fit(np.log(kk[good]), np.log(mm[good]))
    else:
        kappa, pref, r2 = float("nan"), 0.0, float("nan")
    return SpatialEstimate(L, kappa, pref, r2, ks, mods)


@dataclass
class TemporalEstimate:
    alpha: float
    prefactor: float
    r2: float
    separations: np.ndarray = field(repr=False, default=None)
    moduli: np.ndarray = field(repr=False, default=None)


def _resample(traj: SpaceTimeField, window, mask):
    times = np.asarray(traj.times)
    a, b = (times[0], times[-1]) if window is None else window
    V = traj.values.reshape(len(times), -1)[:, mask]
    dt_min = float(np.min(np.diff(times))) if len(times) > 1 else 0.0
    n = int(np.floor((b - a) / max(dt_min, 1e-300) + 1e-9)) if dt_min > 0 else 0
    n = min(n, 1 << 16)
    if n < 1:
        raise ValueError("time window too short")
    tt = np.linspace(a, b, n + 1)
    idx = np.clip(np.searchsorted(times, tt, side="right") - 1, 0, len(times) - 2)
    w = (tt - times[idx]) / (times[idx + 1] - times[idx])
    w = np.clip(w, 0.0, 1.0)[:, None]
    return tt, (1 - w) * V[idx] + w * V[idx + 1]


def temporal_exponent_estimate(traj: SpaceTimeField, region=None, window=None,
                               min_separations: int = 6) -> TemporalEstimate:
    """Fit ``sup_x |u(x,t) - u(x,t')| ~ C |t - t'|^alpha`` over dyadic separations.

    Slices are first resampled onto a uniform time grid (the solver's step
    size varies) by linear interpolation; the smallest separation is dropped.
    """
    mask = _region_mask(traj.grid, region)
    tt, V = _resample(traj, window, mask)
    step = tt[1] - tt[0]
    ks, mods = [], []
    k = 1
    while k < len(tt):
        ks.append(k)
        mods.append(float(np.max(np.abs(V[k:] - V[:-k]))))
        k *= 2
    ks = np.asarray(ks, dtype=float) * step
    mods = np.asarray(mods)
    if np.all(mods == 0):
        raise NoSignalError("no signal: all slices are equal")
    kk, mm = ks[1:], mods[1:]
    if len(kk) < min_separations:
        raise ValueError(f"need >= {min_separations} dyadic separations, have {len(kk)}")
    good = mm > 0
    alpha, pref, r2 = _fit(np.log(kk[good]), np.log(mm[good]))
    return TemporalEstimate(alpha, pref, r2, ks, mods)


@dataclass
class RegularityVerdict:
    lipschitz: float
    K: float
    alpha_hat: float
    r2: float
    alpha_predicted: float
    alpha_label: str
    passed: bool
    lipschitz_refined: float | None = None
    note: str = ""

    def row(self) -> dict:
        return {
            "L_hat": self.lipschitz, "K": self.K, "L_over_K": self.lipschitz / self.K if self.K > 0 else 0.0,
            "alpha_hat": self.alpha_hat, "R2": self.r2, "alpha_predicted": self.alpha_predicted,
            "alpha_label": self.alpha_label, "pass": self.passed, "note": self.note,
        }


def regularity_K(traj: SpaceTimeField, params: FracParams, region=None) -> float:
    """Sup norm over the measured region plus the largest slice tail norm."""
    mask = _region_mask(traj.grid, region)
    sup = float(np.max(np.abs(traj.values.reshape(len(traj.times), -1)[:, mask])))
    tails = [tail_norm(traj.slice(k), params).value for k in (0, len(traj.times) - 1)]
    return sup + max(tails)


def regularity_report(traj: SpaceTimeField, params: FracParams, *, region=None, window=None,
                      refined: SpaceTimeField | None = None, slack: float = 0.1,
                      grid_tol: float = 0.1) -> RegularityVerdict:
    """Compare fitted exponents with the predicted time exponent.

    Passes when ``alpha_hat >= alpha_predicted - slack``, ``L_hat / K`` is
    finite and (if a refined trajectory is given) ``L_hat`` changes by less
    than ``grid_tol`` relatively under refinement. Exponents above the
    prediction are fine: the statement is a lower bound on regularity.
    """
    alpha_pred, label = predicted_alpha(params)
    if params.alpha_is_strict:
        label = params.alpha_label
    last = traj.slice(len(traj.times) - 1)
    sp = spatial_lipschitz_estimate(last, region)
    K = regularity_K(traj, params, region)
    try:
        te = temporal_exponent_estimate(traj, region, window)
    except NoSignalError:
        return RegularityVerdict(sp.lipschitz, K, float("nan"), float("nan"), alpha_pred, label, True,
                                 note="vacuous: no time variation")
    ok = te.alpha >= alpha_pred - slack and np.isfinite(sp.lipschitz / max(K, 1e-300))
    Lr = None
    if refined is not None:
        Lr = spatial_lipschitz_estimate(refined.slice(len(refined.times) - 1), region).lipschitz
        ok = ok and abs(Lr - sp.lipschitz) <= grid_tol * max(sp.lipschitz, 1e-300)
    return RegularityVerdict(sp.lipschitz, K, te.alpha, te.r2, alpha_pred, label, bool(ok), Lr)


# name used by the build contract
theorem_1_1_report = regularity_report

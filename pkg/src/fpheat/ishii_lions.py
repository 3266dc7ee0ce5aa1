"""Geometric ingredients of the doubling-of-variables argument.

Moduli of continuity, cones of concavity, second increments, the localizer
``psi = psi_0^m``, the doubling functional and the splitting of a small ball
into cone / near / intermediate regions.  Each piece is a small pure function
so it can be audited by sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import GridField, SpaceTimeField

R_MAX_LOG = 4.0 / math.e


# ---------------------------------------------------------------------------
# moduli
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Holder:
    """``omega(r) = r**gamma``."""

    gamma: float

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise ValueError("Holder exponent must lie in (0, 1]")


@dataclass(frozen=True)
class LipschitzLog:
    """``omega(r) = r + r / (20 log(r/4))`` on ``(0, r_star]``.

    The profile is increasing and concave for ``r <= 4/e``.  Beyond
    ``r_star`` the doubling functional uses the tangent line at ``r_star``.
    """

    r_star: float = R_MAX_LOG

    def __post_init__(self):
        if not (0.0 < self.r_star <= R_MAX_LOG):
            raise ValueError("r_star must lie in (0, 4/e]")


Modulus = Holder | LipschitzLog


def _check_range(mod, r):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("moduli are evaluated at r >= 0")
    if isinstance(mod, LipschitzLog) and np.any(r > mod.r_star * (1 + 1e-15)):
        raise ValueError(f"r outside the admitted range (0, {mod.r_star:.6g}] of the log-Lipschitz modulus")
    return r


def modulus_eval(mod, r):
    r = _check_range(mod, r)
    if isinstance(mod, Holder):
        return r**mod.gamma
    with np.errstate(divide="ignore", invalid="ignore"):
        out = r + r / (20.0 * np.log(r / 4.0))
    return np.where(r > 0, out, 0.0)


def modulus_deriv(mod, r):
    r = _check_range(mod, r)
    if isinstance(mod, Holder):
        if mod.gamma == 1.0:
            return np.ones_like(r)
        with np.errstate(divide="ignore"):
            return mod.gamma * r ** (mod.gamma - 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        lg = np.log(r / 4.0)
        out = 1.0 + 1.0 / (20.0 * lg) - 1.0 / (20.0 * lg**2)
    return np.where(r > 0, out, 1.0)


def modulus_second(mod, r):
    r = _check_range(mod, r)
    if isinstance(mod, Holder):
        return mod.gamma * (mod.gamma - 1.0) * r ** (mod.gamma - 2.0)
    lg = np.log(r / 4.0)
    return (-1.0 / (20.0 * lg**2) + 1.0 / (10.0 * lg**3)) / r


def _modulus_extended(mod, r):
    """Modulus on [0, inf); log profile continued by its tangent at r_star."""
    r = np.asarray(r, dtype=float)
    if isinstance(mod, Holder):
        return modulus_eval(mod, r)
    rs = mod.r_star
    inside = np.minimum(r, rs)
    return np.where(r <= rs, modulus_eval(mod, inside),
                    modulus_eval(mod, rs) + modulus_deriv(mod, rs) * (r - rs))


# ---------------------------------------------------------------------------
# cones, increments
# ---------------------------------------------------------------------------


def cone_membership(a, z, delta0: float):
    """``|z| < |a|/2`` and ``|<a, z>| >= sqrt(1 - delta0^2) |a||z|``.

    ``z`` may be a single vector or an (n, d) array."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    na = float(np.linalg.norm(a))
    if na == 0.0:
        raise ValueError("cone axis a must be nonzero")
    z = np.asarray(z, dtype=float)
    single = z.ndim <= 1
    Z = np.atleast_2d(z.reshape(-1, len(a)) if not single else z.reshape(1, -1))
    nz = np.linalg.norm(Z, axis=1)
    ok = (nz < na / 2) & (np.abs(Z @ a) >= math.sqrt(1.0 - delta0**2) * na * nz)
    return bool(ok[0]) if single else ok


def second_increment(f: Callable, x, z, grad: Callable | None = None, step: float = 1e-6):
    """``f(x) + grad f(x) . z - f(x + z)`` for a scalar function of a vector.

    Without ``grad`` the gradient is taken by central differences.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if grad is None:
        e = np.eye(len(x)) * step
        g = np.array([(f(x + ek) - f(x - ek)) / (2 * step) for ek in e])
    else:
        g = np.atleast_1d(np.asarray(grad(x), dtype=float))
    return float(f(x) + g @ z - f(x + z))


def radial_second_increment(mod, a: np.ndarray, z: np.ndarray) -> np.ndarray:
    """``omega(|a|) + omega'(|a|) a/|a| . z - omega(|a+z|)`` row-wise."""
    a = np.atleast_2d(a)
    z = np.atleast_2d(z)
    na = np.linalg.norm(a, axis=1)
    naz = np.linalg.norm(a + z, axis=1)
    proj = np.sum(a * z, axis=1) / na
    return modulus_eval(mod, na) + modulus_deriv(mod, na) * proj - modulus_eval(mod, naz)


def _envelope(mod, na, nz):
    if isinstance(mod, Holder):
        return na ** (mod.gamma - 2.0) * nz**2
    return nz**2 / (na * np.log(na) ** 2)


def _sample_cone(rng, n, d, delta0_of_a, a_min=1e-6, a_max=0.5):
    """Random ``a`` (log-uniform radius in [a_min, a_max)) and ``z`` in the cone of a."""
    na = np.exp(rng.uniform(math.log(a_min), math.log(a_max), n))
    u = rng.normal(size=(n, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    a = u * na[:, None]
    d0 = delta0_of_a(na)
    nz = rng.uniform(0.0, 0.5, n) * na
    nz = np.maximum(nz, 1e-3 * na)
    sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    if d == 1:
        z = (sign * nz)[:, None] * u
    else:
        # angle to +-a below arcsin(delta0)
        th = rng.uniform(0.0, 1.0, n) * np.arcsin(d0)
        w = rng.normal(size=(n, d))
        w -= np.sum(w * u, axis=1, keepdims=True) * u
        w /= np.linalg.norm(w, axis=1, keepdims=True)
        z = nz[:, None] * (sign[:, None] * np.cos(th)[:, None] * u + np.sin(th)[:, None] * w)
    return a, z, d0


def _cone_width(mod, delta0: float, log_scaled: bool):
    if log_scaled and isinstance(mod, LipschitzLog):
        return lambda na: np.minimum(delta0, delta0 / np.abs(np.log(na)))
    return lambda na: np.full_like(na, delta0)


@dataclass
class SandwichAudit:
    c: float
    C: float
    c_doubled: float
    C_doubled: float
    delta0: float
    samples: int

    @property
    def positive(self) -> bool:
        return self.c > 0 and self.c_doubled > 0 and np.isfinite(self.C) and np.isfinite(self.C_doubled)

    @property
    def drift(self) -> float:
        """Largest relative change of either envelope under sample doubling."""
        return max(abs(self.c - self.c_doubled) / max(abs(self.c), 1e-300),
                   abs(self.C - self.C_doubled) / max(abs(self.C), 1e-300))


def _sandwich_ratio(mod, delta0, n, d, rng, log_scaled):
    a, z, _ = _sample_cone(rng, n, d, _cone_width(mod, delta0, log_scaled))
    na, nz = np.linalg.norm(a, axis=1), np.linalg.norm(z, axis=1)
    r = radial_second_increment(mod, a, z) / _envelope(mod, na, nz)
    return float(np.min(r)), float(np.max(r))


def increment_sandwich_audit(mod, delta0: float, sample_count: int = 10_000, *, d: int = 2,
                             seed: int = 0, log_scaled: bool = True) -> SandwichAudit:
    """Empirical ``(c, C)`` with ``c env <= delta^2 omega(a, z) <= C env`` on the cone.

    The envelope is ``|a|^(gamma-2)|z|^2`` for Holder moduli and
    ``|z|^2 / (|a| log^2|a|)`` for the log-Lipschitz one.  For the latter the
    cone opening is ``delta0 / |log|a||`` when ``log_scaled`` (the opening the
    Lipschitz step of the argument uses).
    """
    rng = np.random.default_rng(seed)
    c, C = _sandwich_ratio(mod, delta0, sample_count, d, rng, log_scaled)
    c2, C2 = _sandwich_ratio(mod, delta0, 2 * sample_count, d, rng, log_scaled)
    return SandwichAudit(c, C, min(c, c2), max(C, C2), delta0, sample_count)


def audit_delta0(mod, sample_count: int = 100_000, *, d: int = 2, start: float = 0.1,
                 seed: int = 0, max_halvings: int = 20):
    """Halve ``delta0`` from ``start`` until the sandwich lower envelope is positive."""
    delta0 = start
    for _ in range(max_halvings):
        audit = increment_sandwich_audit(mod, delta0, sample_count, d=d, seed=seed)
        if audit.positive:
            return delta0, audit
        delta0 *= 0.5
    raise RuntimeError("no positive sandwich envelope found")


def colinear_band(gamma: float) -> tuple[float, float]:
    """Range of ``delta^2 omega_gamma / (|a|^(gamma-2) |z|^2)`` for colinear z, |z| < |a|/2.

    In units of |a| the ratio is ``(1 + gamma t - (1+t)^gamma) / t^2`` on
    (-1/2, 1/2), which is decreasing in t."""
    f = lambda t: (1.0 + gamma * t - (1.0 + t) ** gamma) / t**2
    return f(0.5), f(-0.5)


# ---------------------------------------------------------------------------
# localizer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Localizer:
    """``psi = psi_0^m`` with ``psi_0(x) = scale * (|x| - 1/2)_+^2``.

    ``psi_0`` vanishes on the closed ball of radius 1/2 and is positive
    outside it; inside B_1 no further cutoff is needed.
    """

    m: float = 3.0
    scale: float = 1.0

    def __post_init__(self):
        if not self.m > 2:
            raise ValueError("localizer power m must exceed 2")

    def psi0(self, x):
        r = np.linalg.norm(np.atleast_2d(x), axis=1)
        return self.scale * np.maximum(r - 0.5, 0.0) ** 2

    def value(self, x):
        return self.psi0(x) ** self.m

    def grad(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = np.linalg.norm(x, axis=1)
        collar = np.maximum(r - 0.5, 0.0)
        g0 = self.scale * 2.0 * collar / np.where(r > 0, r, 1.0)
        p0 = self.scale * collar**2
        return (self.m * p0 ** (self.m - 1.0) * g0)[:, None] * x

    def hessian_bound(self, radius: float = 1.0) -> float:
        """Upper bound for ``|D^2 psi|`` on ``B_radius``."""
        c = max(radius - 0.5, 0.0)
        m, k = self.m, self.scale
        # psi is a function of c = |x| - 1/2: k^m c^(2m)
        radial = k**m * 2 * m * (2 * m - 1) * c ** (2 * m - 2)
        tangential = k**m * 2 * m * c ** (2 * m - 1) / 0.5
        return float(max(radial, tangential))


def localizer_audit(loc: Localizer, sample_count: int = 10_000, *, d: int = 2, seed: int = 0):
    """Max of ``|grad psi| / psi^((m-1)/m)`` over random points of B_1 with psi > 0.

    The ratio equals ``m |grad psi_0| = 2 m scale (|x| - 1/2)``, so the exact
    supremum is ``m scale``, reached on the unit sphere. Returns ``(C, C_doubled)``."""
    rng = np.random.default_rng(seed)

    def run(n):
        u = rng.normal(size=(n, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        r = rng.uniform(0.5, 1.0, n) ** (1.0 / d) if d > 1 else rng.uniform(0.5, 1.0, n)
        r = np.clip(r, 0.5 + 1e-9, 1.0)
        x = u * r[:, None]
        psi = loc.value(x)
        keep = psi > 0
        ratio = np.linalg.norm(loc.grad(x[keep]), axis=1) / psi[keep] ** ((loc.m - 1.0) / loc.m)
        return float(np.max(ratio))

    return run(sample_count), max(run(sample_count), run(2 * sample_count))


def gross_bound_audit(mod, sample_count: int = 10_000, *, d: int = 2, L: float = 10.0, L2: float = 1.0,
                      m: float = 3.0, seed: int = 0, a_min: float = 1e-4, a_max: float = 0.25) -> float:
    """Max of ``|delta^2 phi(., y)(x, z)| / (L omega'(|a|) |z|^2 / |a|)`` over ``|z| < |a|/2``.

    ``phi(x, y) = L omega(|x - y|) + L2 psi(x)``; x is drawn from B_{3/4}."""
    rng = np.random.default_rng(seed)
    loc = Localizer(m)
    n = sample_count
    u = rng.normal(size=(n, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    x = u * (0.75 * rng.random(n) ** (1.0 / d))[:, None]
    na = np.exp(rng.uniform(math.log(a_min), math.log(a_max), n))
    v = rng.normal(size=(n, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    a = v * na[:, None]
    y = x - a
    w = rng.normal(size=(n, d))
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    z = w * (0.5 * na * rng.random(n))[:, None]

    def phi(xx):
        return L * _modulus_extended(mod, np.linalg.norm(xx - y, axis=1)) + L2 * loc.value(xx)

    ga = L * modulus_deriv(mod, na)[:, None] * a / na[:, None] + L2 * loc.grad(x)
    d2 = phi(x) + np.sum(ga * z, axis=1) - phi(x + z)
    nz = np.linalg.norm(z, axis=1)
    ref = L * np.abs(modulus_deriv(mod, na)) * nz**2 / na
    return float(np.max(np.abs(d2) / ref))


# ---------------------------------------------------------------------------
# doubling functional
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DoublingConfig:
    """Constants of ``Phi = u(x)-u(y) - L omega(|x-y|) - L2 psi(x) - L2 (t0-t)^(1+beta)``."""

    L: float
    L2: float
    beta: float = 1.0
    m: float = 3.0
    delta0: float = 0.1
    delta1: float = 0.01
    t0: float = 0.0
    modulus: object = Holder(1.0)

    def __post_init__(self):
        if self.L < 0 or self.L2 < 0 or self.beta <= 0:
            raise ValueError("need L, L2 >= 0 and beta > 0")
        if not self.m > 2:
            raise ValueError("m must exceed 2")
        if not (0 < self.delta1 < self.delta0 < 1):
            raise ValueError("need 0 < delta1 < delta0 < 1")


@dataclass
class DoublingResult:
    value: float
    x: np.ndarray
    y: np.ndarray
    t: float


def _as_spacetime(u) -> SpaceTimeField:
    if isinstance(u, GridField):
        return SpaceTimeField(u.grid, [0.0], u.values[None], u.tail)
    return u


def doubling_sup(u, cfg: DoublingConfig, *, t_shift: float | None = None) -> DoublingResult:
    """Exhaustive maximum of the doubling functional over node pairs in the
    closed unit ball and slices with ``t <= t0``.

    A lone :class:`GridField` is treated as a single slice at ``t = t0``.
    """
    st = _as_spacetime(u)
    if isinstance(u, GridField):
        times = np.array([cfg.t0])
    else:
        times = np.asarray(st.times)
    X = st.grid.nodes()
    inside = np.linalg.norm(X, axis=1) <= 1.0 + 1e-12
    Xb = X[inside]
    loc = Localizer(cfg.m)
    psi = cfg.L2 * loc.value(Xb)
    dist = np.linalg.norm(Xb[:, None, :] - Xb[None, :, :], axis=2)
    pen = cfg.L * _modulus_extended(cfg.modulus, dist) + psi[:, None]
    best = DoublingResult(-np.inf, None, None, None)
    for k, t in enumerate(times):
        if t > cfg.t0 + 1e-12:
            continue
        v = st.values[k].ravel()[inside]
        tterm = cfg.L2 * max(cfg.t0 - t, 0.0) ** (1.0 + cfg.beta)
        Phi = v[:, None] - v[None, :] - pen - tterm
        j = int(np.argmax(Phi))
        val = float(Phi.flat[j])
        if val > best.value:
            i1, i2 = np.unravel_index(j, Phi.shape)
            best = DoublingResult(val, Xb[i1].copy(), Xb[i2].copy(), float(t))
    if best.x is None:
        raise ValueError("no time slice at or before t0")
    return best


class BracketError(RuntimeError):
    pass


def lipschitz_from_doubling(u, L2: float, beta: float = 1.0, tol: float = 1e-3, *, m: float = 3.0,
                            t0: float | None = None, max_doublings: int = 60) -> float:
    """Smallest ``L`` (within ``tol``) for which the doubling functional with
    ``omega(r) = r`` is nonpositive, found by bisection."""
    st = _as_spacetime(u)
    if t0 is None:
        t0 = float(st.times[-1]) if not isinstance(u, GridField) else 0.0
    scale = max(float(np.max(np.abs(st.values))), 1.0)
    thresh = 64 * np.finfo(float).eps * scale

    def ok(L):
        cfg = DoublingConfig(L=L, L2=L2, beta=beta, m=m, t0=t0)
        return doubling_sup(u, cfg).value <= thresh

    if ok(0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    for _ in range(max_doublings):
        if ok(hi):
            break
        lo, hi = hi, 2 * hi
    else:
        raise BracketError("bisection bracket failure: doubling stays positive")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# region decomposition
# ---------------------------------------------------------------------------

CONE, NEAR, MID, FAR = "C", "D1", "D2", "FAR"


def region_classify(z, a, delta0: float, delta1: float):
    """Tag each z as cone ``C``, ``D1 = B_{delta1|a|} \\ C``,
    ``D2 = B_{1/16} \\ (D1 u C)`` or ``FAR`` (outside ``B_{1/16}``)."""
    a = np.atleast_1d(np.asarray(a, dtype=float))
    z = np.asarray(z, dtype=float)
    single = z.ndim <= 1
    Z = z.reshape(1, -1) if single else z
    nz = np.linalg.norm(Z, axis=1)
    na = float(np.linalg.norm(a))
    cone = np.atleast_1d(cone_membership(a, Z, delta0))
    tags = np.where(nz >= 1.0 / 16, FAR, np.where(cone, CONE, np.where(nz < delta1 * na, NEAR, MID)))
    return str(tags[0]) if single else tags


def region_measures_2d(a_norm: float, delta0: float, delta1: float) -> dict:
    """Exact areas of the three regions inside ``B_{1/16}`` in the plane,
    assuming ``delta1 |a| <= min(|a|/2, 1/16)``."""
    th = math.asin(delta0)
    R = min(a_norm / 2, 1.0 / 16)
    cone = 2 * th * R * R
    near = (math.pi - 2 * th) * (delta1 * a_norm) ** 2
    return {CONE: cone, NEAR: near, MID: math.pi / 256 - cone - near}

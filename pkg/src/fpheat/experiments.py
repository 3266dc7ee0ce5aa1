"""Experiment registry driven by :class:`fpheat.config.ExperimentConfig`.

Each experiment writes CSV/SVG/field files into its output directory and
returns a list of contracts ``{"name", "passed", "detail"}``.  The runner
adds ``manifest.json`` referencing every file written.
"""

from __future__ import annotations

import json
import platform
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .barrier import choose_L1, threshold_search, verify_supersolution
from .comparison import OrderedPair, check_comparison, random_ordered_pair
from .config import ExperimentConfig
from .convolution import inf_convolution, sup_convolution
from .core import ConstantExtension, FracParams, GridField, SpaceTimeField, UniformGrid, ZeroExtension, j_p
from .evolution import EvolveControls, evolve
from .io import write_csv, write_field
from .ishii_lions import lipschitz_from_doubling
from .operator import NodeOperator, QuadConfig, frac_p_laplacian_point
from .regularity import spatial_lipschitz_estimate, temporal_exponent_estimate, regularity_report
from .svg import line_plot


def tent(grid: UniformGrid) -> GridField:
    """``max(0, 1 - |x|)``: Lipschitz bump data used by the solver experiments."""
    return GridField.from_function(lambda x: np.maximum(0.0, 1.0 - np.linalg.norm(x, axis=1)), grid)


def _contract(name, passed, **detail):
    return {"name": name, "passed": bool(passed), "detail": detail}


def _refined(grid: UniformGrid) -> UniformGrid:
    return UniformGrid(grid.center, grid.half_width, grid.h / 2)


def midpoint_ring_reference(params: FracParams, n: int = 200_000, r_min: float = 1e-12) -> float:
    """Operator of ``y^2 1_{[-1,1]}`` at 0 in 1D by a log-midpoint rule on rings."""
    edges = np.geomspace(r_min, 1.0, n + 1)
    r = np.sqrt(edges[1:] * edges[:-1])
    f = j_p(-(r**2), params.p) * r ** (-1.0 - params.sp)
    return float(2.0 * np.sum(f * np.diff(edges)))


# ---------------------------------------------------------------------------


def run_operator_validation(cfg: ExperimentConfig, out: Path):
    P, d = cfg.params, cfg.params.d
    x0 = np.full(d, cfg.options["x"])
    quad = QuadConfig(eps_pv=0.05, tol=cfg.quad.tol)
    rows, contracts = [], []

    def add(case, est, target, tol):
        err = abs(est.value - target)
        rows.append([case, est.value, est.error, target, err <= tol])
        contracts.append(_contract(f"operator:{case}", err <= tol, value=est.value, target=target, tol=tol))

    add("constant", frac_p_laplacian_point(lambda y: np.full(len(y), 2.5), x0, P, quad), 0.0, 1e-12)
    add("odd", frac_p_laplacian_point(lambda y: np.sin(3.0 * (y - x0).sum(axis=1)), x0, P, quad), 0.0, 1e-10)
    if (P.p - 1.0) < P.sp:
        est = frac_p_laplacian_point(lambda y: 1.0 + y @ np.arange(1.0, d + 1.0), x0, P, quad, growth=1.0)
        add("linear-with-linear-tail", est, 0.0, 1e-10)
    else:
        rows.append(["linear-with-linear-tail", float("nan"), float("nan"), 0.0, True])
        contracts.append(_contract("operator:linear-with-linear-tail", True,
                                   skipped="linear tail not in the tail space for these (s, p)"))
    if d == 1:
        f = lambda y: np.where(np.abs(y[:, 0]) <= 1.0, y[:, 0] ** 2, 0.0)
        est = frac_p_laplacian_point(f, np.zeros(1), P, quad, breakpoints=[np.array([-1.0]), np.array([1.0])])
        ref = midpoint_ring_reference(P)
        add("square-zero-extended", est, ref, 1e-6)
    # grid operator: constants map to zero, adding a constant is invisible
    g = cfg.grid
    u = GridField.from_function(lambda y: np.cos(np.linalg.norm(y, axis=1)), g)
    op = NodeOperator.build(g, P, ZeroExtension())
    A = op.apply(u.values)
    opc = NodeOperator.build(g, P, ConstantExtension(0.75))
    Ac = opc.apply(u.values + 0.75)
    const = NodeOperator.build(g, P, ConstantExtension(1.0)).apply(np.ones(g.shape))
    shift = float(np.max(np.abs(A - Ac)) / max(np.max(np.abs(A)), 1.0))
    rows.append(["grid-constant", float(np.max(np.abs(const))), 0.0, 0.0, bool(np.all(const == 0))])
    rows.append(["grid-shift", shift, 0.0, 0.0, shift <= 1e-10])
    contracts.append(_contract("grid:constant", np.all(const == 0), max_abs=float(np.max(np.abs(const)))))
    contracts.append(_contract("grid:shift-invariance", shift <= 1e-10, rel=shift))
    files = [write_csv(out / "operator_cases.csv", ["case", "value", "error", "target", "pass"], rows)]
    return contracts, files


def run_comparison(cfg: ExperimentConfig, out: Path):
    rng = np.random.default_rng(cfg.seed)
    lattice = cfg.options["lattice"] or ((cfg.params.p, cfg.params.s),)
    rows = []
    total, worst_energy = 0, -np.inf
    for p, s in lattice:
        P = FracParams(s, p, cfg.params.d)
        for k in range(cfg.options["pairs"]):
            if cfg.options["pair"] == "trivial":
                g = cfg.grid
                pair = OrderedPair(GridField(g, np.ones(g.shape), ConstantExtension(1.0)),
                                   GridField(g, np.zeros(g.shape), ZeroExtension()))
            else:
                pair = random_ordered_pair(cfg.grid, rng)
            rep = check_comparison(pair, cfg.controls, P)
            inc = rep.energy_increase()
            total += rep.count
            worst_energy = max(worst_energy, inc)
            rows.append([p, s, k, rep.count, rep.min_gap, rep.steps, inc, inc <= 1e-6])
    files = [write_csv(out / "violations.csv",
                       ["p", "s", "pair", "violations", "min_gap", "steps", "energy_increase_rel", "dissipative"],
                       rows)]
    contracts = [_contract("comparison:zero-violations", total == 0, violations=total, pairs=len(rows)),
                 _contract("energy:dissipation", worst_energy <= 1e-6, worst_relative_increase=worst_energy)]
    return contracts, files


def run_regularity_sweep(cfg: ExperimentConfig, out: Path):
    rows, contracts, series = [], [], {}
    region = ([-0.5] * cfg.params.d, [0.5] * cfg.params.d)
    for p, s in cfg.options["lattice"]:
        P = FracParams(s, p, cfg.params.d)
        traj = evolve(tent(cfg.grid), cfg.controls, P)
        ref = evolve(tent(_refined(cfg.grid)), cfg.controls, P) if cfg.options["refine"] else None
        v = regularity_report(traj, P, region=region, refined=ref)
        te = temporal_exponent_estimate(traj, region)
        ok = v.passed and v.r2 >= 0.95
        rows.append([p, s, P.q_c, v.lipschitz, v.lipschitz_refined if v.lipschitz_refined is not None else float("nan"),
                     v.K, v.alpha_hat, v.r2, v.alpha_predicted, v.alpha_label, ok])
        contracts.append(_contract(f"regularity:p={p},s={s}", ok, alpha_hat=v.alpha_hat, r2=v.r2,
                                   alpha_predicted=v.alpha_label, L_hat=v.lipschitz, L_refined=v.lipschitz_refined))
        series[f"p={p} s={s}"] = (te.separations.tolist(), te.moduli.tolist())
    files = [write_csv(out / "regularity.csv",
                       ["p", "s", "q_c", "L_hat", "L_hat_refined", "K", "alpha_hat", "R2", "alpha_predicted",
                        "alpha_label", "pass"], rows),
             line_plot(out / "temporal_moduli.svg", series, title="time increments", xlabel="|t - t'|",
                       ylabel="sup |u(t) - u(t')|", logx=True, logy=True)]
    return contracts, files


def run_barrier_check(cfg: ExperimentConfig, out: Path):
    P = cfg.params
    traj = evolve(tent(cfg.grid), cfg.controls, P)
    lip = spatial_lipschitz_estimate(traj.slice(0), ([-0.5] * P.d, [0.5] * P.d)).lipschitz
    eta = cfg.options["eta"]
    L1 = choose_L1(eta, lip, P.gamma_barrier)
    n = cfg.options["samples"]
    C, _ = threshold_search(P, traj, eta=eta, L1=L1, c_start=cfg.options["c_start"], n_x=n)
    rep = verify_supersolution(P, traj, eta=eta, L1=L1, C_claim=2 * C, n_x=n)
    rows = [[float(sm.x[0]) if P.d == 1 else " ".join(repr(float(v)) for v in sm.x), sm.t, sm.dt_psi, sm.local,
             sm.exterior, sm.total, sm.error] for sm in rep.samples]
    files = [write_csv(out / "barrier_samples.csv", ["x", "t", "dt_psi", "local", "exterior", "total", "error"], rows)]
    contracts = [_contract("barrier:supersolution", rep.certified, threshold=C, C_claim=2 * C, minimum=rep.minimum,
                           error=rep.error, gamma=P.gamma_barrier, L1=L1, eta=eta)]
    return contracts, files


def run_convolution_demo(cfg: ExperimentConfig, out: Path):
    P = cfg.params
    traj = evolve(tent(cfg.grid), cfg.controls, P)
    k = np.unique(np.linspace(0, len(traj.times) - 1, cfg.options["slices"]).round().astype(int))
    u = SpaceTimeField(traj.grid, traj.times[k], traj.values[k], traj.tail)
    X = u.grid.nodes()
    rows, contracts, files = [], [], []
    prev = None
    scale = max(float(np.max(np.abs(u.values))), 1.0)
    for eps in sorted(cfg.options["eps"], reverse=True):
        lo, hi = inf_convolution(u, eps), sup_convolution(u, eps)
        below = bool(np.all(lo.values <= u.values)) and bool(np.all(hi.values >= u.values))
        # semiconcavity of u_eps - |x|^2/eps along each axis
        w = lo.values.reshape(len(u.times), -1) - np.sum(X**2, axis=1)[None, :] / eps
        w = w.reshape(lo.values.shape)
        sc = -np.inf
        for ax in range(1, w.ndim):
            sc = max(sc, float(np.max(np.diff(w, n=2, axis=ax))))
        tol_sc = 1e-9 * max(scale, float(np.max(np.abs(X))) ** 2 / eps)
        dt = np.diff(u.times)
        tl = float(np.max(np.abs(np.diff(lo.values, axis=0)).reshape(len(dt), -1) / dt[:, None])) if len(dt) else 0.0
        # smaller eps penalizes moving more, so u_eps increases toward u
        mono = True if prev is None else bool(np.all(lo.values >= prev - 1e-15))
        gap = float(np.max(u.values - lo.values))
        rows.append([eps, below, sc, tol_sc, tl, 1.0 / eps, mono, gap])
        contracts.append(_contract(f"convolution:eps={eps}", below and sc <= tol_sc and tl <= 1.0 / eps * (1 + 1e-12) and mono,
                                   max_second_difference=sc, time_lipschitz=tl, sup_gap=gap))
        prev = lo.values
        files.append(write_field(out / f"inf_conv_eps{eps:g}_t0.txt", lo.slice(0), P))
    files.append(write_field(out / "input_t0.txt", u.slice(0), P))
    # worked example: u = |x|, eps = 1, value 3/4 at x = 1
    g = UniformGrid((0.0,), (2.0,), 0.01)
    ab = SpaceTimeField.from_function(lambda x, t: np.abs(x[:, 0]), g, [0.0, 0.1])
    v = inf_convolution(ab, 1.0).values[0]
    i1 = int(np.argmin(np.abs(g.axes[0] - 1.0)))
    i0 = int(np.argmin(np.abs(g.axes[0])))
    ok = abs(v[i1] - 0.75) <= 1e-12 and v[i0] == 0.0
    contracts.append(_contract("convolution:worked-example", ok, value_at_1=float(v[i1]), value_at_0=float(v[i0])))
    files.insert(0, write_csv(out / "convolution.csv",
                              ["eps", "ordered", "max_second_difference", "tolerance", "time_lipschitz", "bound",
                               "monotone_in_eps", "sup_gap"], rows))
    return contracts, files


def run_lipschitz_probe(cfg: ExperimentConfig, out: Path):
    P = cfg.params
    traj = evolve(tent(cfg.grid), cfg.controls, P)
    last = traj.slice(len(traj.times) - 1)
    direct = spatial_lipschitz_estimate(last, ([-0.5] * P.d, [0.5] * P.d)).lipschitz
    rows = []
    for L2 in cfg.options["L2"]:
        L = lipschitz_from_doubling(last, L2, tol=cfg.options["tol"])
        rows.append([L2, L, direct, abs(L - direct) / max(direct, 1e-300)])
    lin = GridField.from_function(lambda x: 3.0 * x[:, 0], cfg.grid)
    L3 = lipschitz_from_doubling(lin, max(cfg.options["L2"]), tol=cfg.options["tol"])
    files = [write_csv(out / "lipschitz.csv", ["L2", "L_doubling", "L_direct", "rel_diff"], rows)]
    contracts = [_contract("lipschitz:solver-output", rows[-1][3] <= 0.1, L_doubling=rows[-1][1], L_direct=direct),
                 _contract("lipschitz:linear-3x", abs(L3 - 3.0) <= 0.3, L=L3)]
    return contracts, files


REGISTRY = {
    "operator-validation": run_operator_validation,
    "comparison": run_comparison,
    "regularity-sweep": run_regularity_sweep,
    "barrier-check": run_barrier_check,
    "convolution-demo": run_convolution_demo,
    "lipschitz-probe": run_lipschitz_probe,
}


def run_experiment(cfg: ExperimentConfig, out_dir) -> dict:
    """Run, write artifacts and ``manifest.json``; returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    contracts, files = REGISTRY[cfg.experiment](cfg, out)
    wall = time.perf_counter() - t0
    failures = [c["name"] for c in contracts if not c["passed"]]
    manifest = {
        "experiment": cfg.experiment,
        "config": cfg.echo(),
        "versions": {"fpheat": __version__, "python": platform.python_version(), "numpy": np.__version__,
                     "scipy": scipy.__version__},
        "wall_time_s": wall,
        "files": sorted(str(Path(f).relative_to(out)) for f in files),
        "contracts": contracts,
        "failures": failures,
        "status": "pass" if not failures else "fail",
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return manifest


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)

"""Acceptance criteria 1 to 11 at their stated tolerances and runtimes.

Each test prints ``criterion N: PASS|FAIL ...`` and the lines are repeated
in the terminal summary.  Run with ``pytest tests/test_acceptance.py -s``.
"""

import math
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from conftest import CRITERIA
from fpheat import FracParams, GridField, UniformGrid, chord_sandwich_audit, pv_local_bound
from fpheat.config import parse_config
from fpheat.experiments import run_experiment
from fpheat.ishii_lions import (CONE, FAR, MID, NEAR, Holder, LipschitzLog, Localizer, increment_sandwich_audit,
                                localizer_audit, region_classify, region_measures_2d)

CONFIGS = Path(__file__).resolve().parents[1] / "scripts" / "configs"


@contextmanager
def criterion(n: int, budget_s: float, what: str):
    t0 = time.perf_counter()
    status, note = "PASS", ""
    try:
        yield
        wall = time.perf_counter() - t0
        if wall > budget_s:
            status, note = "FAIL", f" (runtime {wall:.1f} s over budget {budget_s:g} s)"
    except BaseException as exc:  # record, then re-raise
        wall = time.perf_counter() - t0
        status, note = "FAIL", f" ({type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''})"
        raise
    finally:
        line = f"criterion {n}: {status} {what} [{wall:.2f} s]{note}"
        CRITERIA.append(line)
        print(line)
    assert wall <= budget_s, note


def config(text: str):
    return parse_config(text)


def contracts_ok(man):
    bad = [c for c in man["contracts"] if not c["passed"]]
    assert not bad, bad
    return {c["name"]: c for c in man["contracts"]}


def test_criterion_01_operator(tmp_path):
    with criterion(1, 10, "operator catalog within 1e-10, y^2 reference vs dual oracle within 1e-6"):
        for p, s in ((2.0, 0.6), (3.0, 0.5), (2.5, 0.7)):
            man = run_experiment(config(f"[run]\nexperiment = operator-validation\n[params]\ns = {s}\np = {p}\n"
                                        "[grid]\nnodes = 101\n"), tmp_path / f"op{p}")
            c = contracts_ok(man)
            assert c["operator:square-zero-extended"]["detail"]["tol"] == 1e-6
            assert abs(c["operator:square-zero-extended"]["detail"]["value"] - (-2.0 / (2 * p - 2 - s * p))) <= 1e-6


def test_criterion_02_chord_sandwich():
    with criterion(2, 5, "chord ratio in a fixed positive band, stable within 5% under doubling"):
        for p in (2.0, 2.5, 3.0, 3.5):
            a = chord_sandwich_audit(p, 10_000, seed=0)
            assert 0 < a.low <= a.high <= 1.0 + 1e-12 and a.stable, a


def test_criterion_03_pv_local_bound():
    quadratics = [(1.0, 0.0, 0.3), (2.0, -1.0, -0.4), (0.5, 3.0, 0.1), (-1.5, 2.0, 0.0)]
    with criterion(3, 5, "pv_local_bound decreasing, below 10% within 5 halvings"):
        for p, s in ((2.0, 0.6), (3.0, 0.5), (2.5, 0.4)):
            P = FracParams(s, p, 1)
            for a, b, x in quadratics:
                w = lambda y, a=a, b=b: a * y[:, 0] ** 2 + b * y[:, 0]
                seq = [pv_local_bound(w, [x], 0.2 * 0.5**k, P).value for k in range(6)]
                assert all(u > v for u, v in zip(seq, seq[1:])), seq
                assert seq[5] < 0.1 * seq[0], seq


COMPARISON = """\
[run]
experiment = comparison
seed = 7
[params]
s = 0.5
p = 3
[grid]
half_width = 1
nodes = 201
[evolve]
t_end = 0.02
[options]
pairs = 50
lattice = 2:0.6, 3:0.5
"""


@pytest.fixture(scope="module")
def comparison_run(tmp_path_factory):
    t0 = time.perf_counter()
    man = run_experiment(config(COMPARISON), tmp_path_factory.mktemp("cmp"))
    return man, time.perf_counter() - t0


def test_criterion_04_comparison(comparison_run):
    man, wall = comparison_run
    with criterion(4, 300, f"100 ordered pairs, 201 nodes, t_end 0.02, zero violations (run {wall:.1f} s)"):
        c = contracts_ok(man)["comparison:zero-violations"]["detail"]
        assert c["violations"] == 0 and c["pairs"] == 100
        assert wall <= 300


def test_criterion_05_energy(comparison_run):
    man, _ = comparison_run
    with criterion(5, 1, "Gagliardo energy non-increasing within 1e-6 F(u0) per step"):
        c = {x["name"]: x for x in man["contracts"]}["energy:dissipation"]
        assert c["passed"] and c["detail"]["worst_relative_increase"] <= 1e-6, c


def test_criterion_06_convolution(tmp_path):
    from fpheat import SpaceTimeField
    from fpheat.convolution import inf_convolution

    with criterion(6, 30, "u_eps <= u, semiconcavity, 1/eps time-Lipschitz, worked examples"):
        man = run_experiment(config(open(CONFIGS / "convolution_demo.cfg").read()), tmp_path / "conv")
        c = contracts_ok(man)
        assert c["convolution:worked-example"]["detail"]["value_at_1"] == pytest.approx(0.75, abs=1e-12)
        g = UniformGrid((0.0,), (2.0,), 0.01)
        x = g.axes[0]
        # constants are fixed points
        cst = SpaceTimeField.from_function(lambda y, t: np.full(len(y), 1.5), g, [0.0, 0.1])
        assert np.all(inf_convolution(cst, 0.3).values == 1.5)
        # |x| at the origin stays 0; at x = 1 with eps = 1 the minimizer is y = 1/2, value 3/4
        ab = SpaceTimeField.from_function(lambda y, t: np.abs(y[:, 0]), g, [0.0, 0.1])
        v = inf_convolution(ab, 1.0).values[0]
        assert v[np.argmin(np.abs(x))] == 0.0
        assert v[np.argmin(np.abs(x - 1.0))] == pytest.approx(0.75, abs=1e-12)


def test_criterion_07_geometry():
    with criterion(7, 60, "region partition exhaustive/exclusive, sandwich envelopes positive, localizer stable"):
        rng = np.random.default_rng(11)
        n = 100_000
        na = 0.4
        a = na * np.array([math.cos(0.7), math.sin(0.7)])
        d0, d1 = 0.1, 0.02
        r = (1 / 16) * np.sqrt(rng.random(n))
        th = rng.uniform(0, 2 * np.pi, n)
        z = np.stack([r * np.cos(th), r * np.sin(th)], 1)
        tags = region_classify(z, a, d0, d1)
        counts = {k: int(np.sum(tags == k)) for k in (CONE, NEAR, MID, FAR)}
        assert counts[FAR] == 0 and sum(counts.values()) == n   # one tag each, nothing left over
        exact = region_measures_2d(na, d0, d1)
        for k in (CONE, NEAR, MID):
            pk = exact[k] / (math.pi / 256)
            assert abs(counts[k] / n - pk) <= 4 * math.sqrt(pk * (1 - pk) / n)
        for mod, delta0 in ((Holder(0.5), 0.1), (Holder(0.9), 0.1), (LipschitzLog(), 0.05)):
            audit = increment_sandwich_audit(mod, delta0, 10_000, d=2)
            assert audit.positive and audit.c > 0, (mod, audit)
        C, C2 = localizer_audit(Localizer(3.0), 10_000)
        assert np.isfinite(C) and abs(C - C2) <= 0.05 * C and C <= 3.0 + 1e-9


def test_criterion_08_lipschitz(tmp_path):
    with criterion(8, 120, "doubling: 3x gives 3 +- 10%, solver output within 10% of direct L"):
        man = run_experiment(config(open(CONFIGS / "lipschitz_probe.cfg").read()), tmp_path / "lip")
        c = contracts_ok(man)
        assert abs(c["lipschitz:linear-3x"]["detail"]["L"] - 3.0) <= 0.3
        d = c["lipschitz:solver-output"]["detail"]
        assert abs(d["L_doubling"] - d["L_direct"]) <= 0.1 * d["L_direct"]


BARRIER = """\
[run]
experiment = barrier-check
[params]
s = {s}
p = {p}
[grid]
half_width = 2
nodes = 161
[evolve]
t_end = 0.05
dt_max = 1e-3
[options]
eta = 0.1
c_start = 0.01
"""


@pytest.mark.parametrize("p,s,gamma", [(3.0, 0.5, 1.0), (2.0, 0.6, 1.2)])
def test_criterion_09_barrier(tmp_path, p, s, gamma):
    with criterion(9, 300, f"barrier supersolution certified at 2x threshold, p={p:g} s={s:g} gamma={gamma:g}"):
        man = run_experiment(config(BARRIER.format(p=p, s=s)), tmp_path / "bar")
        d = contracts_ok(man)["barrier:supersolution"]["detail"]
        assert d["gamma"] == pytest.approx(gamma)
        assert d["C_claim"] == pytest.approx(2 * d["threshold"])
        assert d["minimum"] - d["error"] > 0


REGULARITY = """\
[run]
experiment = regularity-sweep
[params]
s = {s}
p = {p}
[grid]
half_width = 2
nodes = 201
[evolve]
t_end = 0.05
dt_max = 1e-4
[options]
lattice = {p}:{s}
refine = true
"""


@pytest.mark.parametrize("p,s,alpha_min", [(3.0, 0.5, 0.9), (2.0, 0.6, 1 / 1.2 - 0.1)])
def test_criterion_10_regularity(tmp_path, p, s, alpha_min):
    with criterion(10, 600, f"alpha_hat >= {alpha_min:.3f}, R^2 >= 0.95, L stable within 10% (p={p:g}, s={s:g})"):
        man = run_experiment(config(REGULARITY.format(p=p, s=s)), tmp_path / "reg")
        d = contracts_ok(man)[f"regularity:p={p},s={s}"]["detail"]
        assert d["alpha_hat"] >= alpha_min and d["r2"] >= 0.95, d
        assert abs(d["L_hat"] - d["L_refined"]) <= 0.1 * d["L_refined"], d


SMALL = {
    "operator-validation": "[grid]\nnodes = 51\n",
    "comparison": "[grid]\nnodes = 51\n[evolve]\nt_end = 0.005\n[options]\npairs = 5\nlattice = 2:0.6, 3:0.5\n",
    "regularity-sweep": "[grid]\nhalf_width = 2\nnodes = 101\n[evolve]\nt_end = 0.02\ndt_max = 1e-4\n"
                        "[options]\nlattice = 3:0.5, 2:0.6, 2.5:0.6\nrefine = false\n",
    "barrier-check": "[grid]\nhalf_width = 2\nnodes = 81\n[evolve]\nt_end = 0.02\n",
    "convolution-demo": "[grid]\nnodes = 51\n[evolve]\nt_end = 0.01\n",
    "lipschitz-probe": "[grid]\nhalf_width = 2\nnodes = 81\n[evolve]\nt_end = 0.02\n",
}


def test_criterion_11_determinism(tmp_path):
    with criterion(11, 300, "rerun with identical config and seed gives byte-identical CSV bodies"):
        for name, extra in SMALL.items():
            cfg = config(f"[run]\nexperiment = {name}\nseed = 3\n[params]\ns = 0.5\np = 3\n" + extra)
            a = run_experiment(cfg, tmp_path / name / "a")
            b = run_experiment(config(f"[run]\nexperiment = {name}\nseed = 3\n[params]\ns = 0.5\np = 3\n" + extra),
                               tmp_path / name / "b")
            assert a["files"] == b["files"]
            csvs = [f for f in a["files"] if f.endswith(".csv")]
            assert csvs, name
            for f in a["files"]:
                if f.endswith((".csv", ".txt", ".svg")):
                    assert (tmp_path / name / "a" / f).read_bytes() == (tmp_path / name / "b" / f).read_bytes(), (name, f)

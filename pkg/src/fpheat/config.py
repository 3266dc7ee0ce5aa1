"""Sectioned ``key = value`` experiment configs.

Grammar (one statement per line)::

    # comment                  blank lines and '#' comments are ignored
    [section]                  starts a section
    key = value                assignment inside the current section

Sections and keys are fixed (see ``SCHEMA``); unknown sections or keys,
duplicates, missing required keys, bad types and out-of-range parameters are
rejected with the offending line number.  The ``[options]`` section holds
experiment-specific keys listed in ``OPTIONS``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .core import FracParams, ParameterError, UniformGrid
from .evolution import EvolveControls
from .operator import QuadConfig

EXPERIMENTS = ("operator-validation", "comparison", "regularity-sweep", "barrier-check",
               "convolution-demo", "lipschitz-probe")


class ConfigError(ValueError):
    """Config rejected; ``line`` is the 1-based line number (0 if not line-bound)."""

    def __init__(self, message: str, line: int = 0):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


def _choice(*opts):
    def conv(v: str):
        if v not in opts:
            raise ValueError(f"expected one of {', '.join(opts)}")
        return v
    return conv


def _lattice(v: str):
    """``p:s, p:s, ...``"""
    out = []
    for item in v.split(","):
        a, _, b = item.strip().partition(":")
        out.append((float(a), float(b)))
    if not out:
        raise ValueError("empty lattice")
    return tuple(out)


def _floats(v: str):
    return tuple(float(x) for x in v.split(","))


def _bool(v: str):
    if v.lower() in ("1", "true", "yes", "on"):
        return True
    if v.lower() in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


# section -> key -> (converter, required, default)
SCHEMA: dict[str, dict[str, tuple]] = {
    "run": {
        "experiment": (_choice(*EXPERIMENTS), True, None),
        "seed": (int, False, 0),
        "output": (str, False, None),
    },
    "params": {"s": (float, True, None), "p": (float, True, None), "d": (int, False, 1)},
    "grid": {"half_width": (float, False, 1.0), "nodes": (int, False, 201)},
    "evolve": {
        "t_end": (float, False, 0.02),
        "dt_max": (float, False, 1e-3),
        "dt_policy": (_choice("fixed", "adaptive-monotone"), False, "adaptive-monotone"),
        "delta": (float, False, None),
    },
    "quad": {
        "eps_pv": (float, False, None),
        "ring_count": (int, False, 32),
        "tol": (float, False, 1e-8),
        "r_tail": (float, False, None),
        "order": (int, False, 8),
    },
}

OPTIONS: dict[str, dict[str, tuple]] = {
    "operator-validation": {"x": (float, False, 0.3)},
    "comparison": {"pairs": (int, False, 10), "pair": (_choice("random", "trivial"), False, "random"),
                   "lattice": (_lattice, False, None)},
    "regularity-sweep": {"lattice": (_lattice, False, ((3.0, 0.5), (2.0, 0.6))), "refine": (_bool, False, True)},
    "barrier-check": {"eta": (float, False, 0.1), "c_start": (float, False, 1e-2), "samples": (int, False, 9)},
    "convolution-demo": {"eps": (_floats, False, (0.4, 0.2, 0.1)), "slices": (int, False, 9)},
    "lipschitz-probe": {"L2": (_floats, False, (50.0, 200.0, 1000.0)), "tol": (float, False, 1e-3)},
}

# the measured region is B_{1/2}; the barrier and the doubling probe also need B_1 inside the box
MIN_HALF_WIDTH = {"regularity-sweep": 0.75, "barrier-check": 1.25, "lipschitz-probe": 1.25, "convolution-demo": 0.75}


@dataclass
class ExperimentConfig:
    experiment: str
    params: FracParams
    grid: UniformGrid
    controls: EvolveControls
    quad: QuadConfig
    seed: int = 0
    output: str | None = None
    options: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)   # section -> key -> text, for the manifest echo

    def echo(self) -> dict:
        return {"experiment": self.experiment, "seed": self.seed, "output": self.output,
                "q_c": self.params.q_c, "gamma": self.params.gamma_barrier,
                "alpha_predicted": self.params.alpha_label, "sections": self.raw}


def _tokenize(text: str):
    """Yield ``(line_no, section, key, value)``; raises on malformed lines."""
    section = None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ConfigError(f"malformed section header {raw.strip()!r}", n)
            section = line[1:-1].strip()
            yield n, section, None, None
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", n)
        if section is None:
            raise ConfigError("assignment before any [section]", n)
        key, _, value = line.partition("=")
        yield n, section, key.strip(), value.strip()


def parse_config(text: str) -> ExperimentConfig:
    seen_sections: dict[str, int] = {}
    values: dict[str, dict[str, tuple[str, int]]] = {}
    for n, section, key, value in _tokenize(text):
        if key is None:
            if section not in SCHEMA and section != "options":
                raise ConfigError(f"unknown section [{section}]", n)
            if section in seen_sections:
                raise ConfigError(f"duplicate section [{section}] (first on line {seen_sections[section]})", n)
            seen_sections[section] = n
            values.setdefault(section, {})
            continue
        sec = values.setdefault(section, {})
        if key in sec:
            raise ConfigError(f"duplicate key '{key}' in [{section}] on lines {sec[key][1]} and {n}", n)
        sec[key] = (value, n)

    def convert(section, schema):
        given = values.get(section, {})
        out = {}
        for key, (val, n) in given.items():
            if key not in schema:
                raise ConfigError(f"unknown key '{key}' in [{section}]", n)
            conv = schema[key][0]
            try:
                out[key] = conv(val)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {section}.{key}: {val!r} ({exc})", n) from None
        hdr = seen_sections.get(section, 0)
        for key, (conv, required, default) in schema.items():
            if key not in out:
                if required:
                    raise ConfigError(f"missing required key '{key}' in [{section}]", hdr)
                out[key] = default
        return out

    if "run" not in values:
        raise ConfigError("missing required section [run]")
    run = convert("run", SCHEMA["run"])
    if "params" not in values:
        raise ConfigError("missing required section [params]")
    prm = convert("params", SCHEMA["params"])
    grid = convert("grid", SCHEMA["grid"])
    evo = convert("evolve", SCHEMA["evolve"])
    qd = convert("quad", SCHEMA["quad"])
    opts = convert("options", OPTIONS[run["experiment"]])

    def line_of(section, key):
        return values.get(section, {}).get(key, (None, seen_sections.get(section, 0)))[1]

    try:
        params = FracParams(prm["s"], prm["p"], prm["d"])
    except ParameterError as exc:
        bad = "p" if str(exc).startswith("p") else ("s" if str(exc).startswith("s") else "d")
        raise ConfigError(str(exc), line_of("params", bad)) from None
    try:
        h = 2.0 * grid["half_width"] / (grid["nodes"] - 1)
        ug = UniformGrid((0.0,) * params.d, (grid["half_width"],) * params.d, h)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"invalid grid: {exc}", line_of("grid", "nodes")) from None
    try:
        controls = EvolveControls(evo["t_end"], evo["dt_max"], evo["dt_policy"], evo["delta"])
    except ValueError as exc:
        raise ConfigError(f"invalid evolve block: {exc}", seen_sections.get("evolve", 0)) from None
    try:
        qkw = {k: v for k, v in qd.items() if v is not None}
        quad = QuadConfig.for_grid(ug, **qkw)
    except ValueError as exc:
        raise ConfigError(f"invalid quad block: {exc}", seen_sections.get("quad", 0)) from None
    if "lattice" in opts and opts["lattice"]:
        for p, s in opts["lattice"]:
            try:
                FracParams(s, p, params.d)
            except ParameterError as exc:
                raise ConfigError(f"lattice point (p={p}, s={s}): {exc}", line_of("options", "lattice")) from None
    need = MIN_HALF_WIDTH.get(run["experiment"], 0.0)
    if grid["half_width"] < need:
        raise ConfigError(f"{run['experiment']} needs grid.half_width >= {need:g} (got {grid['half_width']:g})",
                          line_of("grid", "half_width"))
    raw = {sec: {k: v for k, (v, _) in kv.items()} for sec, kv in values.items()}
    return ExperimentConfig(run["experiment"], params, ug, controls, quad, run["seed"], run["output"], opts, raw)


def load_config(path) -> ExperimentConfig:
    from pathlib import Path

    return parse_config(Path(path).read_text())

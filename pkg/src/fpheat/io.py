"""Plain-text persistence for grid fields and trajectories.

A field file is a ``#``-prefixed header (box, spacing, parameters, tail)
followed by one node value per line in row-major order.  A trajectory is a
directory of such files plus ``index.csv`` listing slice times.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import AnalyticTail, ConstantExtension, FracParams, GridField, SpaceTimeField, UniformGrid, ZeroExtension


def tail_to_dict(tail) -> dict:
    if isinstance(tail, ZeroExtension):
        return {"tag": "zero"}
    if isinstance(tail, ConstantExtension):
        return {"tag": "constant", "value": tail.value_}
    if isinstance(tail, AnalyticTail):
        return {"tag": "analytic", "kind": tail.kind, "amplitude": tail.amplitude, "exponent": tail.exponent,
                "radius": tail.radius, "slope": list(tail.slope), "offset": tail.offset}
    raise TypeError(f"unknown tail {tail!r}")


def tail_from_dict(d: dict):
    tag = d["tag"]
    if tag == "zero":
        return ZeroExtension()
    if tag == "constant":
        return ConstantExtension(float(d["value"]))
    if tag == "analytic":
        return AnalyticTail(d["kind"], d["amplitude"], d["exponent"], d["radius"], tuple(d["slope"]), d["offset"])
    raise ValueError(f"unknown tail tag {tag!r}")


def _fmt(v: float) -> str:
    return repr(float(v))


def format_field(u: GridField, params: FracParams | None = None) -> str:
    g = u.grid
    lines = [
        "# fpheat-field 1",
        "# center " + " ".join(_fmt(c) for c in g.center),
        "# half_width " + " ".join(_fmt(w) for w in g.half_width),
        "# h " + _fmt(g.h),
        "# shape " + " ".join(str(n) for n in g.shape),
        "# tail " + json.dumps(tail_to_dict(u.tail), sort_keys=True),
    ]
    if params is not None:
        lines.append(f"# params s={_fmt(params.s)} p={_fmt(params.p)} d={params.d}")
    lines.append("value")
    lines.extend(_fmt(v) for v in u.values.ravel())
    return "\n".join(lines) + "\n"


def parse_field(text: str) -> tuple[GridField, FracParams | None]:
    head, body = {}, []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, rest = line[1:].strip().partition(" ")
            head[key] = rest
        elif line.strip() and line.strip() != "value":
            body.append(float(line))
    if "fpheat-field" not in head:
        raise ValueError("not a field file")
    center = tuple(float(v) for v in head["center"].split())
    hw = tuple(float(v) for v in head["half_width"].split())
    grid = UniformGrid(center, hw, float(head["h"]))
    shape = tuple(int(v) for v in head["shape"].split())
    if grid.shape != shape:
        raise ValueError(f"header shape {shape} does not match the box {grid.shape}")
    values = np.asarray(body, dtype=float)
    if values.size != int(np.prod(shape)):
        raise ValueError(f"expected {int(np.prod(shape))} values, got {values.size}")
    params = None
    if "params" in head:
        kv = dict(item.split("=") for item in head["params"].split())
        params = FracParams(float(kv["s"]), float(kv["p"]), int(kv["d"]))
    return GridField(grid, values.reshape(shape), tail_from_dict(json.loads(head["tail"]))), params


def write_field(path, u: GridField, params: FracParams | None = None) -> Path:
    path = Path(path)
    path.write_text(format_field(u, params))
    return path


def read_field(path) -> tuple[GridField, FracParams | None]:
    return parse_field(Path(path).read_text())


def write_trajectory(directory, traj: SpaceTimeField, params: FracParams | None = None) -> list[Path]:
    """Write ``slice_00000.txt ...`` and ``index.csv``; returns written paths."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    out = []
    rows = ["k,t,file"]
    for k, t in enumerate(traj.times):
        name = f"slice_{k:05d}.txt"
        out.append(write_field(d / name, traj.slice(k), params))
        rows.append(f"{k},{_fmt(t)},{name}")
    (d / "index.csv").write_text("\n".join(rows) + "\n")
    out.append(d / "index.csv")
    return out


def read_trajectory(directory) -> tuple[SpaceTimeField, FracParams | None]:
    d = Path(directory)
    lines = (d / "index.csv").read_text().splitlines()[1:]
    times, slices, params = [], [], None
    for line in lines:
        _, t, name = line.split(",")
        f, params = read_field(d / name)
        times.append(float(t))
        slices.append(f)
    return SpaceTimeField.from_slices(times, slices), params


def write_csv(path, header: list[str], rows) -> Path:
    """CSV with ``repr`` floats, so identical numbers give identical bytes."""
    path = Path(path)

    def cell(v):
        if isinstance(v, (bool, np.bool_)):
            return "1" if v else "0"
        if isinstance(v, (float, np.floating)):
            return _fmt(v)
        return str(v)

    text = ",".join(header) + "\n" + "".join(",".join(cell(v) for v in r) + "\n" for r in rows)
    path.write_text(text)
    return path

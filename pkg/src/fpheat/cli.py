"""``fpheat run|validate|report``.

Exit codes: 0 all contracts pass, 1 contract failure, 2 config error.
Outputs go to ``$FPHEAT_OUTPUT_ROOT/<output>`` (root defaults to ./runs;
``output`` defaults to the experiment name).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import ConfigError, load_config

EXIT_OK, EXIT_CONTRACT, EXIT_CONFIG = 0, 1, 2
ENV_ROOT = "FPHEAT_OUTPUT_ROOT"


def output_dir(cfg) -> Path:
    root = Path(os.environ.get(ENV_ROOT, "runs"))
    return root / (cfg.output or cfg.experiment)


def _load(path):
    try:
        return load_config(path)
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
    return None


def cmd_validate(args) -> int:
    cfg = _load(args.config)
    if cfg is None:
        return EXIT_CONFIG
    P = cfg.params
    print(f"ok: {cfg.experiment} s={P.s} p={P.p} d={P.d} q_c={P.q_c:g} gamma={P.gamma_barrier:g} "
          f"alpha={P.alpha_label} nodes={cfg.grid.shape}")
    return EXIT_OK


def cmd_run(args) -> int:
    from .experiments import run_experiment

    cfg = _load(args.config)
    if cfg is None:
        return EXIT_CONFIG
    out = output_dir(cfg)
    man = run_experiment(cfg, out)
    for c in man["contracts"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}")
    print(f"wrote {out} ({len(man['files'])} files, {man['wall_time_s']:.2f} s)")
    if man["failures"]:
        print(json.dumps({"failures": man["failures"]}), file=sys.stderr)
        return EXIT_CONTRACT
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.output_dir) / "manifest.json"
    try:
        man = json.loads(path.read_text())
    except (OSError, ValueError) as exc:
        print(f"cannot read manifest: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"experiment {man['experiment']}  status {man['status']}  wall {man['wall_time_s']:.2f} s")
    for c in man["contracts"]:
        detail = ", ".join(f"{k}={v}" for k, v in sorted(c["detail"].items()))
        print(f"  {'PASS' if c['passed'] else 'FAIL'} {c['name']}  {detail}")
    missing = [f for f in man["files"] if not (Path(args.output_dir) / f).exists()]
    for f in missing:
        print(f"  missing file {f}")
    return EXIT_CONTRACT if man["failures"] or missing else EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="fpheat", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.set_defaults(func=cmd_run)
    v = sub.add_parser("validate", help="parse and validate a config")
    v.add_argument("config")
    v.set_defaults(func=cmd_validate)
    p = sub.add_parser("report", help="summarize an output directory")
    p.add_argument("output_dir")
    p.set_defaults(func=cmd_report)
    args = ap.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

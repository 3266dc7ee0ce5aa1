"""Run every config in scripts/configs through the CLI and summarize.

    python scripts/run_all.py [config ...]

Outputs land under $FPHEAT_OUTPUT_ROOT (default ./runs).  Exit status is the
worst CLI exit code seen.
"""

import sys
import time
from pathlib import Path

from fpheat.cli import main

HERE = Path(__file__).resolve().parent


def run(paths):
    worst = 0
    for cfg in paths:
        t0 = time.perf_counter()
        code = main(["run", str(cfg)])
        print(f"== {Path(cfg).name}: exit {code} ({time.perf_counter() - t0:.1f} s)")
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(run(sys.argv[1:] or sorted((HERE / "configs").glob("*.cfg"))))

#!/usr/bin/env python3
"""Run every named preset and write one CSV per preset into an output directory.

    python3 scripts/reproduce_figures.py --out results --trials 50
    python3 scripts/reproduce_figures.py --only fig1,fig5
"""

import argparse
import sys
import time
from pathlib import Path

from batchmn import cli
from batchmn.presets import PRESETS


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--trials", help="override the Monte Carlo trial count of every risk-curve preset")
    ap.add_argument("--seed", default="0")
    ap.add_argument("--threads", default="auto")
    ap.add_argument("--only", help="comma-separated preset names")
    args = ap.parse_args(argv)

    names = args.only.split(",") if args.only else list(PRESETS)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    status = 0
    for name in names:
        command = PRESETS[name]["command"]
        cmd = [command, "--preset", name, "--seed", args.seed, "--out", str(out_dir / f"{name}.csv")]
        if command == "risk-curve":
            cmd += ["--threads", args.threads]
            if args.trials:
                cmd += ["--trials", args.trials]
        t0 = time.perf_counter()
        code = cli.run(cmd)
        print(f"{name:6s} {command:11s} exit={code} {time.perf_counter() - t0:7.1f}s", file=sys.stderr)
        status = max(status, code)
    return status


if __name__ == "__main__":
    sys.exit(main())

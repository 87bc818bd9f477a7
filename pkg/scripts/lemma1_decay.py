#!/usr/bin/env python3
"""Finite-p error of the projection statistic over a (b, alpha, p) grid.

Uses the reduced sampler, which costs a couple of microseconds per trial,
so tens of millions of trials are practical. Prints a CSV to stdout.

    python3 scripts/lemma1_decay.py --trials 20000000 --b 1,2,3,4,5,6 --alpha 0.3,0.7
"""

import argparse
import csv
import sys

from batchmn.cli import parse_grid
from batchmn.lemmas import ProjectionScenario, check_noisy_projection


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--b", default="2,3,6")
    ap.add_argument("--alpha", default="0.3,0.7")
    ap.add_argument("--p", default="500,1000,2000,4000")
    ap.add_argument("--xi", type=float, default=0.8)
    ap.add_argument("--delta", type=float, default=0.7)
    ap.add_argument("--trials", type=int, default=2_000_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["b", "alpha", "p", "empirical", "predicted", "signed_rel_err", "rel_stderr"])
    for b in parse_grid(args.b, int):
        for alpha in parse_grid(args.alpha):
            for p in parse_grid(args.p, int):
                s = ProjectionScenario.from_xi(args.xi, p=p, b=b, delta=args.delta, alpha=alpha,
                                               trials=args.trials, seed=args.seed)
                res = check_noisy_projection(s, method="reduced")
                w.writerow([b, alpha, p, repr(res.empirical), repr(res.predicted),
                            repr(res.empirical / res.predicted - 1), repr(res.stderr / res.predicted)])
                sys.stdout.flush()


if __name__ == "__main__":
    main()

"""Iterative refinement demo: per-round recovery error from a single sketch.

With the regularization above the certified threshold the error contracts
geometrically in the number of rounds, each round costing one low-dimensional
solve and one gradient call.
"""

import argparse
import sys

from subsketch.harness import main as harness_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=400)
    parser.add_argument("--d", type=int, default=800)
    parser.add_argument("--m", type=int, default=32)
    parser.add_argument("--q", type=int, default=0, help="power iterations for the sketch")
    parser.add_argument("--T", type=int, default=6)
    parser.add_argument("--lambda", dest="lam", type=float, default=1.0)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--out", default="iterative.csv")
    args = parser.parse_args()

    argv = (f"iterative --n {args.n} --d {args.d} --decay exp --nu 0.1 "
            f"--loss logistic --lambda {args.lam} --embedding adaptive-gaussian "
            f"--m {args.m} --q {args.q} --T {args.T} --trials 1 --seed {args.seed} "
            f"--out {args.out}").split()
    return harness_main(argv)


if __name__ == "__main__":
    sys.exit(main())

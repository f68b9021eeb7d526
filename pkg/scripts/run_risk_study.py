"""Zero-order estimation risk against its analytic small-regularization limit.

Sweeps the sketch size around the statistical dimension of the instance and
records the Monte-Carlo risk (objective column) next to the bias-variance
limit (bound_rhs column).
"""

import argparse
import sys

from subsketch.harness import main as harness_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=200)
    parser.add_argument("--d", type=int, default=400)
    parser.add_argument("--noise-var", type=float, default=25.0)
    parser.add_argument("--m", default="40,60,84,120,160")
    parser.add_argument("--trials", type=int, default=500, help="noise draws per sketch size")
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--out", default="risk.csv")
    args = parser.parse_args()

    argv = (f"risk --n {args.n} --d {args.d} --decay exp --nu 0.2 --loss quadratic "
            f"--lambda 1e-8 --embedding gaussian --m {args.m} "
            f"--noise-var {args.noise_var} --trials {args.trials} --seed {args.seed} "
            f"--out {args.out}").split()
    return harness_main(argv)


if __name__ == "__main__":
    sys.exit(main())

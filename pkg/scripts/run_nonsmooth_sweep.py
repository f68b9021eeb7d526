"""Recovery error versus sketch size for non-smooth losses.

For each loss (L1, sup-norm, hinge) the sweep records the restricted-dual
estimator next to the arbitrary-subgradient comparator on a geometric-decay
instance.  Defaults match the synthetic benchmark (n=1000, d=2000,
lambda=0.01, decay ratio 0.98, m in {32,...,512}, 20 trials).
"""

import argparse
import sys

from subsketch.harness import main as harness_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--losses", default="l1,linf,hinge")
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--out-prefix", default="nonsmooth_sweep")
    parser.add_argument("--small", action="store_true")
    args = parser.parse_args()

    if args.small:
        n, d, ms, trials = 100, 200, "16,32", 3
    else:
        n, d, ms, trials = 1000, 2000, "32,64,128,256,512", 20

    status = 0
    for loss in args.losses.split(","):
        argv = (f"nonsmooth --n {n} --d {d} --decay geom --ratio 0.98 "
                f"--loss {loss} --lambda 0.01 --embedding adaptive-gaussian "
                f"--m {ms} --trials {trials} --seed {args.seed} --tol 1e-9 "
                f"--out {args.out_prefix}_{loss}.csv").split()
        status |= harness_main(argv)
    return status


if __name__ == "__main__":
    sys.exit(main())

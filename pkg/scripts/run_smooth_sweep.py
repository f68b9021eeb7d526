"""Recovery error versus sketch size for smooth losses: adaptive whitened
sketching against the unbiased oblivious baseline.

Runs both embeddings over the same instances and seeds and writes one CSV plus
summary per route.  Defaults reproduce the synthetic benchmark scale
(n=1000, d=2000, lambda=1e-4, m in {8,...,512}, 10 trials); pass --small for a
desk-scale smoke run.
"""

import argparse
import sys

from subsketch.harness import main as harness_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--decay", default="exp", choices=["exp", "poly"])
    parser.add_argument("--nu", type=float, default=None,
                        help="decay exponent (default: 0.1 for exp, 1.0 for poly)")
    parser.add_argument("--loss", default="logistic", choices=["logistic", "relu", "quadratic"])
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--out-prefix", default="smooth_sweep")
    parser.add_argument("--small", action="store_true", help="tiny instance for a quick check")
    args = parser.parse_args()

    nu = args.nu if args.nu is not None else (0.1 if args.decay == "exp" else 1.0)
    if args.small:
        n, d, ms, trials = 100, 200, "8,16,32", 3
    else:
        n, d, ms, trials = 1000, 2000, "8,16,32,64,128,256,512", 10

    status = 0
    for embedding in ("adaptive-gaussian", "oblivious-dagger"):
        argv = (f"sweep --n {n} --d {d} --decay {args.decay} --nu {nu} "
                f"--loss {args.loss} --lambda 1e-4 --embedding {embedding} "
                f"--m {ms} --trials {trials} --seed {args.seed} "
                f"--out {args.out_prefix}_{embedding}.csv").split()
        status |= harness_main(argv)
    return status


if __name__ == "__main__":
    sys.exit(main())

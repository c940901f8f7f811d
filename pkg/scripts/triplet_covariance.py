"""Empirical covariance of the diffusively scaled triplet against the Gaussian limit kernel.

    python scripts/triplet_covariance.py --p 0.3 --n 4096 --paths 20000 --seed 1
"""

import argparse

from stepwalk.laws import parse_law
from stepwalk.limits import LimitCovarianceModel, limit_covariance
from stepwalk.verify import scaled_summary
from stepwalk.walks import ReinforcementParams

NAMES = {"S": "B", "S_hat": "B_hat", "S_check": "B_check"}


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--p", type=float, default=0.3)
    ap.add_argument("--n", type=int, default=4096)
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--law", default="rademacher")
    ap.add_argument("--grid", default="0.25,0.5,1")
    args = ap.parse_args()
    grid = [float(t) for t in args.grid.split(",")]
    law = parse_law(args.law)
    s = scaled_summary(ReinforcementParams(args.p, law, False), args.n, args.paths, args.seed, grid)
    model = LimitCovarianceModel(args.p)
    C, se = s.cov, s.cov_se
    print(f"{'entry':<28} {'empirical':>10} {'limit':>10} {'z':>7}")
    for a, (ca, ta) in enumerate(s.labels):
        for b in range(a, len(s.labels)):
            cb, tb = s.labels[b]
            lim = limit_covariance(model, NAMES[ca], NAMES[cb], ta, tb)
            z = (C[a, b] - lim) / se[a, b] if se[a, b] > 0 else 0.0
            print(f"{ca}({ta:g}) {cb}({tb:g})".ljust(28) + f" {C[a, b]:10.4f} {lim:10.4f} {z:7.2f}")


if __name__ == "__main__":
    main()

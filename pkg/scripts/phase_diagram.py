"""Growth of E[S_hat_n^2] and E[S_check_n^2] across the memory parameter.

Uses the exact moment recursions, so no sampling is involved. The local
log-log slope at the largest n approaches max(1, 2p) for the reinforced walk
(with a log correction at p = 1/2) and 1 for the counterbalanced one.
"""

import argparse

import numpy as np

from stepwalk.laws import rademacher
from stepwalk.moments import exact_moments


def local_slope(m2, n):
    return float(np.log(m2[n] / m2[n // 2]) / np.log(2.0))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=2**20)
    ap.add_argument("--ps", default="0,0.1,0.2,0.3,0.4,0.45,0.5,0.55,0.6,0.7,0.8,0.9,1")
    args = ap.parse_args()
    print(f"{'p':>5} {'slope hat':>10} {'max(1,2p)':>10} {'slope check':>12} {'E[S_check^2]/n':>15} {'1/(1+2p)':>9}")
    for p in (float(x) for x in args.ps.split(",")):
        mom = exact_moments(p, rademacher(), args.n)
        print(f"{p:5.2f} {local_slope(mom.m2_hat, args.n):10.4f} {max(1.0, 2 * p):10.4f} "
              f"{local_slope(mom.m2_check, args.n):12.4f} {mom.m2_check[args.n] / args.n:15.5f} "
              f"{1 / (1 + 2 * p):9.5f}")


if __name__ == "__main__":
    main()

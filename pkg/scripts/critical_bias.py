"""Finite-n bias of the critically scaled reinforced walk at p = 1/2.

The exact variance of S_hat at floor(n^t), scaled by sqrt(log n) n^(t/2),
is H_{floor(n^t)} / log n, which tends to t only at rate 1/log n. This prints
the exact values beside the Monte Carlo estimate at one n.
"""

import argparse
import math

import numpy as np

from stepwalk.laws import rademacher
from stepwalk.suites import critical_oracle
from stepwalk.verify import scaled_summary
from stepwalk.walks import ReinforcementParams


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--mc-n", type=int, default=10_000)
    args = ap.parse_args()
    print(f"{'n':>12} {'var(0.5) exact':>15} {'var(1) exact':>13}")
    for e in (2, 4, 8, 16, 32):
        n = 10**e
        if n ** 0.5 > 1e7:
            # past the recursion's practical range use the harmonic form directly
            h = lambda m: math.log(m) + np.euler_gamma + 1 / (2 * m)
            print(f"{n:12.0e} {h(int(n ** 0.5)) / math.log(n):15.5f} {h(n) / math.log(n):13.5f}")
            continue
        orc = critical_oracle(rademacher(), n, [0.5, 1.0])
        print(f"{n:12.0e} {orc[0, 0]:15.5f} {orc[1, 1]:13.5f}")
    s = scaled_summary(ReinforcementParams(0.5, rademacher(), False), args.mc_n, args.paths, args.seed,
                       [0.5, 1.0], "critical")
    print(f"Monte Carlo at n={args.mc_n}: var(0.5)={s.cov[0, 0]:.4f}+-{s.cov_se[0, 0]:.4f} "
          f"cov(0.5,1)={s.cov[0, 1]:.4f}+-{s.cov_se[0, 1]:.4f} var(1)={s.cov[1, 1]:.4f}+-{s.cov_se[1, 1]:.4f}")


if __name__ == "__main__":
    main()

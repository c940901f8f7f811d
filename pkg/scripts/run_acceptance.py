"""Run the acceptance battery and write one JSON report per suite.

    python scripts/run_acceptance.py --seed 20261015 --out reports/
"""

import argparse
import pathlib
import sys
import time

from stepwalk.suites import SUITES, run_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--seed", type=int, default=20261015)
    ap.add_argument("--out", type=pathlib.Path, default=None)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("suites", nargs="*", default=list(SUITES))
    args = ap.parse_args()
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
    ok = True
    for k, name in enumerate(args.suites, start=1):
        t0 = time.perf_counter()
        report = run_suite(name, args.seed, args.threads)
        ok &= report.passed
        print(f"{k:2d} {report.summary_line()} ({time.perf_counter() - t0:.0f}s)", flush=True)
        if args.out is not None:
            (args.out / f"{name}.json").write_text(report.to_json() + "\n")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())

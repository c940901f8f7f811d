"""Acceptance battery: one suite per criterion, default configs, one fixed master seed."""

import time

import pytest

from conftest import ACCEPTANCE_SEED, record_acceptance
from stepwalk.suites import run_suite

CRITERIA = [
    (1, "enumeration"),
    (2, "reinforced-variance"),
    (3, "counterbalanced-variance"),
    (4, "triplet-diffusive"),
    (5, "critical"),
    (6, "brackets"),
    (7, "isometry"),
    (8, "growth"),
    (9, "lln"),
    (10, "superdiffusive"),
    (11, "truncation"),
    (12, "limit-samplers"),
    (13, "conditional-moments"),
    (14, "determinism"),
]


@pytest.mark.parametrize("number,suite", CRITERIA, ids=[f"{k:02d}-{s}" for k, s in CRITERIA])
def test_criterion(number, suite, capsys):
    start = time.perf_counter()
    report = run_suite(suite, ACCEPTANCE_SEED)
    line = f"criterion {number:2d} {report.summary_line()} ({time.perf_counter() - start:.0f}s)"
    record_acceptance(line)
    with capsys.disabled():
        print("\n" + line)
    assert report.passed, "\n".join(f"{c.name}: estimate {c.estimate} target {c.target} se {c.se}"
                                    for c in report.failures())

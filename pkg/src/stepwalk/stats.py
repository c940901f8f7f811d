"""Ensemble moment accumulation, one-sample KS and check/report records."""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr


@dataclass(frozen=True)
class EnsembleSummary:
    """Streaming first to fourth cross moments of an ensemble of grid vectors.

    Raw power sums of ``y = x - shift`` are accumulated, with ``shift`` fixed
    up front (zero by default); merging two summaries is plain addition, so a
    fixed split always merges to the same bits.
    """

    labels: tuple
    shift: np.ndarray
    n_paths: int
    s1: np.ndarray
    s2: np.ndarray
    s3: np.ndarray
    s4: np.ndarray
    vmin: np.ndarray
    vmax: np.ndarray

    @classmethod
    def empty(cls, labels, shift=None):
        d = len(labels)
        shift = np.zeros(d) if shift is None else np.asarray(shift, dtype=float)
        z = np.zeros((d, d))
        return cls(tuple(labels), shift, 0, np.zeros(d), z, z.copy(), z.copy(),
                   np.full(d, np.inf), np.full(d, -np.inf))

    def update(self, X):
        """Summary with the rows of ``X`` (paths by labels) added."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(self.labels):
            raise ValueError(f"expected {len(self.labels)} columns, got {X.shape[1]}")
        Y = X - self.shift
        Y2 = Y * Y
        part = EnsembleSummary(self.labels, self.shift, X.shape[0], Y.sum(0), Y.T @ Y, Y2.T @ Y,
                               Y2.T @ Y2, X.min(0), X.max(0))
        return self.merge(part)

    def merge(self, other):
        if other.labels != self.labels:
            raise ValueError("cannot merge summaries over different grids or components")
        if not np.array_equal(other.shift, self.shift):
            raise ValueError("cannot merge summaries with different shifts")
        return EnsembleSummary(self.labels, self.shift, self.n_paths + other.n_paths,
                               self.s1 + other.s1, self.s2 + other.s2, self.s3 + other.s3,
                               self.s4 + other.s4, np.minimum(self.vmin, other.vmin),
                               np.maximum(self.vmax, other.vmax))

    @property
    def mean(self):
        return self.shift + self.s1 / self.n_paths

    @property
    def cov(self):
        n = self.n_paths
        d = self.s1 / n
        C = (self.s2 - n * np.outer(d, d)) / (n - 1)
        return (C + C.T) / 2.0

    @property
    def cov_se(self):
        """Standard errors of the covariance entries from the fourth cross moments."""
        n = self.n_paths
        a = self.s1 / n
        E2 = self.s2 / n
        E3 = self.s3 / n  # E3[i, j] = E[y_i^2 y_j]
        E4 = self.s4 / n
        al, be = a[:, None], a[None, :]
        sq = np.diag(E2)
        m22 = (E4 - 2 * be * E3 - 2 * al * E3.T + be**2 * sq[:, None] + al**2 * sq[None, :]
               + 4 * al * be * E2 - 3 * al**2 * be**2)
        c = E2 - np.outer(a, a)
        v = np.maximum(m22 - c**2, 0.0) / n
        se = np.sqrt(v)
        return (se + se.T) / 2.0

    def index(self, label):
        return self.labels.index(label)


def ensemble_rows(item):
    """Flatten a scaled path, Gaussian ensemble or dict of arrays into ``(labels, rows)``."""
    if hasattr(item, "samples"):
        S = item.samples
        labels = [(c, float(t)) for c in item.components for t in item.grid.points]
        return labels, S.reshape(S.shape[0], -1)
    if hasattr(item, "values"):
        values, grid = item.values, item.grid
    else:
        values, grid = item
    names = list(values)
    labels = [(c, float(t)) for c in names for t in grid]
    cols = [np.atleast_2d(values[c]) for c in names]
    return labels, np.concatenate(cols, axis=1)


def empirical_moments(items, grid=None, shift=None):
    """Single-pass :class:`EnsembleSummary` over a stream of ensembles, merged in order.

    ``items`` yields :class:`~stepwalk.diagnostics.ScaledPath` batches,
    :class:`~stepwalk.limits.GaussianEnsemble` objects or ``(values, grid)``
    pairs. All must share components and grid (and match ``grid`` if given).
    """
    summary = None
    for item in items:
        labels, rows = ensemble_rows(item)
        if grid is not None:
            want = sorted({float(t) for t in np.atleast_1d(grid)})
            if sorted({t for _, t in labels}) != want:
                raise ValueError("grid mismatch between ensemble and requested grid")
        if summary is None:
            summary = EnsembleSummary.empty(labels, shift)
        elif tuple(labels) != summary.labels:
            raise ValueError("grid or component mismatch between ensembles")
        summary = summary.update(rows)
    if summary is None:
        raise ValueError("no ensembles supplied")
    return summary


def kolmogorov_sf(x, terms=100):
    """``P(K > x)`` for the Kolmogorov limit law, by its alternating series."""
    if x <= 0.2:
        return 1.0
    k = np.arange(1, terms + 1)
    s = 2.0 * np.sum((-1.0) ** (k - 1) * np.exp(-2.0 * k * k * x * x))
    return float(min(max(s, 0.0), 1.0))


def ks_statistic(samples, sd):
    """Two-sided one-sample KS distance to the centred normal with standard deviation ``sd``."""
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    F = ndtr(x / sd)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


RULES = ("abs", "rel", "z", "z+tol", "rel+z", "bool")


@dataclass(frozen=True)
class Check:
    """One comparison of an estimate with its target.

    ``rule`` fixes the pass criterion: ``abs`` is ``|d| <= tol``, ``rel`` is
    ``|d| <= tol |target|``, ``z`` is ``|d| <= z_max se``, ``z+tol`` is
    ``|d| <= z_max se + tol``, ``rel+z`` is ``|d| <= tol |target| + z_max se``
    and ``bool`` carries an externally decided flag. ``d = estimate - target``.
    """

    name: str
    statistic: str
    target: float
    estimate: float
    se: float
    tol: float
    rule: str
    z_max: float = 3.0
    flag: bool | None = None

    def __post_init__(self):
        if self.rule not in RULES:
            raise ValueError(f"unknown rule {self.rule!r}")

    @property
    def z(self):
        d = self.estimate - self.target
        if not self.se > 0:
            return 0.0 if d == 0 else math.copysign(math.inf, d)
        return d / self.se

    @property
    def passed(self):
        if self.rule == "bool":
            return bool(self.flag)
        d = abs(self.estimate - self.target)
        se = self.se if np.isfinite(self.se) else 0.0
        if not np.isfinite(d):
            return False
        slack = 1e-12
        if self.rule == "abs":
            return d <= self.tol + slack
        if self.rule == "rel":
            return d <= self.tol * abs(self.target) + slack
        if self.rule == "z":
            return d <= self.z_max * se + slack
        if self.rule == "z+tol":
            return d <= self.z_max * se + self.tol + slack
        return d <= self.tol * abs(self.target) + self.z_max * se + slack

    def as_dict(self):
        def num(x):
            x = float(x)
            return x if math.isfinite(x) else None

        return {"name": self.name, "statistic": self.statistic, "target": num(self.target),
                "estimate": num(self.estimate), "se": num(self.se), "z": num(self.z),
                "tol": num(self.tol), "pass": self.passed, "rule": self.rule}


@dataclass(frozen=True)
class TestReport:
    suite: str
    config: dict
    seed: int
    checks: list = field(default_factory=list)
    notes: str = ""

    __test__ = False

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def extend(self, other):
        return TestReport(self.suite, self.config, self.seed, self.checks + list(other.checks), self.notes)

    def to_json(self):
        payload = {"suite": self.suite, "config": self.config, "seed": self.seed,
                   "checks": [c.as_dict() for c in self.checks]}
        if self.notes:
            payload["notes"] = self.notes
        return json.dumps(payload, indent=2, default=_jsonable)

    def summary_line(self):
        bad = self.failures()
        state = "PASS" if not bad else "FAIL"
        tail = "" if not bad else " failing: " + ", ".join(c.name for c in bad[:5])
        return f"{state} {self.suite}: {len(self.checks) - len(bad)}/{len(self.checks)} checks{tail}"


def _jsonable(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, tuple):
        return list(x)
    return str(x)


def mean_se(x):
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x)))


def var_se(x):
    """Sample variance and its standard error ``sqrt((mu4 - var^2)/n)``."""
    x = np.asarray(x, dtype=float)
    c = x - x.mean()
    v = float(c @ c / (len(x) - 1))
    m4 = float(np.mean(c**4))
    return v, math.sqrt(max(m4 - v * v, 0.0) / len(x))


def median_boot(x, seed, reps=1000):
    """Median with a bootstrap standard error (resampling from a seeded generator)."""
    x = np.asarray(x, dtype=float)
    g = np.random.default_rng(seed)
    boots = np.median(x[g.integers(0, len(x), size=(reps, len(x)))], axis=1)
    return float(np.median(x)), float(boots.std(ddof=1))

"""Step distributions and their truncation split."""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from . import rng

_SQRT2PI = np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class StepLaw:
    """Law of the typical step X.

    ``kind`` is one of ``rademacher``, ``discrete``, ``gaussian``,
    ``truncated-low`` and ``truncated-high``. Use the classmethod constructors
    and :func:`truncate_law` rather than building instances by hand.
    """

    kind: str
    m: float
    sigma2: float
    m2: float
    bound: float | None = None
    values: tuple = ()
    weights: tuple = ()
    mean: float = 0.0
    sd: float = 0.0
    base: "StepLaw | None" = field(default=None, repr=False)
    K: float | None = None
    shift: float = 0.0

    @classmethod
    def rademacher(cls):
        return cls("rademacher", 0.0, 1.0, 1.0, bound=1.0, values=(-1.0, 1.0), weights=(0.5, 0.5))

    @classmethod
    def discrete(cls, values, weights=None):
        v = np.asarray(values, dtype=float)
        if v.ndim != 1 or v.size == 0 or not np.all(np.isfinite(v)):
            raise ValueError("discrete values must be a non-empty finite list")
        w = np.full(v.size, 1.0 / v.size) if weights is None else np.asarray(weights, dtype=float)
        if w.shape != v.shape or np.any(w < 0):
            raise ValueError("weights must be nonnegative and match values")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        m = float(np.dot(w, v))
        m2 = float(np.dot(w, v * v))
        sigma2 = float(np.dot(w, (v - m) ** 2))
        return cls("discrete", m, sigma2, m2, bound=float(np.max(np.abs(v))),
                   values=tuple(v.tolist()), weights=tuple(w.tolist()))

    @classmethod
    def gaussian(cls, mean=0.0, sd=1.0):
        if not sd > 0:
            raise ValueError("gaussian sd must be positive")
        return cls("gaussian", float(mean), float(sd) ** 2, float(mean) ** 2 + float(sd) ** 2,
                   mean=float(mean), sd=float(sd))

    @property
    def centred(self):
        return abs(self.m) <= 1e-12

    def support(self):
        """(values, weights) for laws with finite support, else ``None``."""
        if self.kind in ("rademacher", "discrete"):
            return np.array(self.values), np.array(self.weights)
        if self.kind in ("truncated-low", "truncated-high"):
            sup = self.base.support()
            if sup is None:
                return None
            v, w = sup
            return _truncate_values(v, self.K, self.kind == "truncated-low") - self.shift, w
        return None

    def sample_bits(self, bits):
        """Map uint64 random bits (any shape) to step values of this law."""
        if self.kind == "rademacher":
            return np.where(bits >> np.uint64(63), 1.0, -1.0)
        if self.kind == "discrete":
            u = rng.bits_to_uniform(bits)
            cw = np.cumsum(self.weights)
            idx = np.minimum(np.searchsorted(cw, u, side="right"), len(self.values) - 1)
            return np.asarray(self.values)[idx]
        if self.kind == "gaussian":
            return self.mean + self.sd * ndtri(rng.bits_to_open_uniform(bits))
        x = self.base.sample_bits(bits)
        return _truncate_values(x, self.K, self.kind == "truncated-low") - self.shift


def _truncate_values(x, K, low):
    keep = np.abs(x) <= K
    if not low:
        keep = ~keep
    return np.where(keep, x, 0.0)


def _gaussian_tail_moments(mean, sd, K):
    """E[X 1{|X|>K}] and E[X^2 1{|X|>K}] for X ~ N(mean, sd^2), via survival functions."""
    a = (-K - mean) / sd
    b = (K - mean) / sd
    phi_a = np.exp(-0.5 * a * a) / _SQRT2PI
    phi_b = np.exp(-0.5 * b * b) / _SQRT2PI
    p_tail = ndtr(a) + ndtr(-b)
    e1 = mean * p_tail + sd * (phi_b - phi_a)
    e2 = (mean * mean + sd * sd) * p_tail + sd * ((K + mean) * phi_b - (-K + mean) * phi_a)
    return float(e1), float(e2)


def _partial_moments(law, K):
    """(E[X1{|X|<=K}], E[X^2 1{|X|<=K}], E[X1{|X|>K}], E[X^2 1{|X|>K}])."""
    sup = law.support()
    if sup is not None:
        v, w = sup
        inside = np.abs(v) <= K
        lo1 = float(np.sum(w * np.where(inside, v, 0.0)))
        lo2 = float(np.sum(w * np.where(inside, v * v, 0.0)))
        hi1 = float(np.sum(w * np.where(inside, 0.0, v)))
        hi2 = float(np.sum(w * np.where(inside, 0.0, v * v)))
        return lo1, lo2, hi1, hi2
    if law.kind == "gaussian":
        hi1, hi2 = _gaussian_tail_moments(law.mean, law.sd, K)
        return law.m - hi1, law.m2 - hi2, hi1, hi2
    raise ValueError(f"cannot truncate a {law.kind} law without finite support")


def truncate_law(law, K):
    """Split X into centred bounded and tail parts.

    Returns ``(low, high)`` where ``low`` samples ``X 1{|X|<=K} - E[X 1{|X|<=K}]``
    and ``high`` samples ``X 1{|X|>K} - E[X 1{|X|>K}]``. Both laws read the same
    random bits as ``law``, so walks built from one event stream split exactly.
    Their variances are ``low.sigma2`` and ``high.sigma2``.
    """
    if not K > 0:
        raise ValueError(f"truncation level K must be positive, got {K!r}")
    lo1, lo2, hi1, hi2 = _partial_moments(law, K)
    lo_var = max(lo2 - lo1 * lo1, 0.0)
    hi_var = max(hi2 - hi1 * hi1, 0.0)
    sup = law.support()
    if sup is not None:
        v, _ = sup
        inside = np.abs(v) <= K
        lo_bound = float(np.max(np.abs(np.where(inside, v, 0.0) - lo1)))
        hi_bound = float(np.max(np.abs(np.where(inside, 0.0, v) - hi1)))
    else:
        lo_bound = K + abs(lo1)
        hi_bound = None
    low = StepLaw("truncated-low", 0.0, lo_var, lo_var, bound=lo_bound, base=law, K=float(K), shift=lo1)
    high = StepLaw("truncated-high", 0.0, hi_var, hi_var, bound=hi_bound, base=law, K=float(K), shift=hi1)
    return low, high


def rademacher():
    return StepLaw.rademacher()


def discrete(values, weights=None):
    return StepLaw.discrete(values, weights)


def gaussian(mean=0.0, sd=1.0):
    return StepLaw.gaussian(mean, sd)


def parse_law(text, mean=0.0, sd=1.0, values=None, weights=None):
    """Build a law from a short text description.

    ``rademacher``, ``gaussian`` (with ``mean``/``sd``), ``discrete`` (with
    ``values`` and optional ``weights``) or inline ``discrete:v1,v2,...``.
    """
    kind, _, inline = str(text).partition(":")
    kind = kind.strip().lower()
    if kind == "rademacher":
        return rademacher()
    if kind == "gaussian":
        return gaussian(float(mean), float(sd))
    if kind == "discrete":
        vals = inline or values
        if vals is None or vals == "":
            raise ValueError("discrete law needs values")
        return discrete(_floats(vals), None if weights is None else _floats(weights))
    raise ValueError(f"unknown law {text!r}")


def _floats(x):
    if isinstance(x, str):
        return [float(v) for v in x.split(",") if v.strip()]
    return [float(v) for v in x]

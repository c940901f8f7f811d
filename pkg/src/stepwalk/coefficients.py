import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class CoefficientTable:
    """Martingale multipliers for the reinforced and counterbalanced walks.

    ``a_hat[k-1]`` and ``a_check[k-1]`` hold the coefficients at time ``k``
    (``k = 1 .. n_max``), both equal to 1 at ``k = 1`` and propagated by the
    running products ``a[k+1] = a[k] * k / (k +- p)``. ``a_check`` is ``None``
    at ``p = 1``.

    The unit-start products equal ``Gamma(1+p) Gamma(k)/Gamma(k+p)`` and
    ``Gamma(1-p) Gamma(k)/Gamma(k-p)``; :attr:`hat_norm` and :attr:`check_norm`
    convert them to the Gamma ratios, which behave like ``k**-p`` and ``k**p``.
    Scaled martingales use the Gamma ratios, isometry checks the raw products.
    """

    p: float
    n_max: int
    a_hat: np.ndarray
    a_check: np.ndarray | None

    @property
    def hat_norm(self):
        return 1.0 / math.gamma(1.0 + self.p)

    @property
    def check_norm(self):
        if self.a_check is None:
            raise ValueError("counterbalanced coefficients undefined at p=1")
        return 1.0 / math.gamma(1.0 - self.p)

    def gamma_hat(self):
        return self.a_hat * self.hat_norm

    def gamma_check(self):
        return self.a_check * self.check_norm

    def hat_at(self, k):
        """Coefficient at time ``k`` (array-like, 1-based); 0 maps to 0."""
        return _lookup(self.a_hat, k)

    def check_at(self, k):
        if self.a_check is None:
            raise ValueError("counterbalanced coefficients undefined at p=1")
        return _lookup(self.a_check, k)


def _lookup(a, k):
    k = np.asarray(k, dtype=np.int64)
    padded = np.concatenate(([0.0], a))
    return padded[k]


def build_coefficients(p, n_max, counterbalanced=True):
    """Coefficient table for memory parameter ``p`` up to time ``n_max``.

    Computed by cumulative products of the one-step ratios, so no Gamma
    function is evaluated and ``n_max`` may be very large (memory permitting).
    At ``p = 1`` the counterbalanced table is refused; pass
    ``counterbalanced=False`` to get the reinforced column alone.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p!r}")
    n_max = int(n_max)
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    if p == 1.0 and counterbalanced:
        raise ValueError("counterbalanced coefficients undefined at p=1")
    k = np.arange(1, n_max, dtype=np.float64)
    a_hat = np.empty(n_max)
    a_hat[0] = 1.0
    np.cumprod(k / (k + p), out=a_hat[1:])
    a_check = None
    if counterbalanced:
        a_check = np.empty(n_max)
        a_check[0] = 1.0
        np.cumprod(k / (k - p), out=a_check[1:])
    return CoefficientTable(float(p), n_max, a_hat, a_check)

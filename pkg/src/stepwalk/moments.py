from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MomentOracle:
    """Exact first and second moments of the reinforced and counterbalanced walks.

    Arrays are indexed by time, entry 0 being time 0 (all zero). The second
    moments are ``None`` unless the law is centred.
    """

    p: float
    m: float
    sigma2: float
    mean_hat: np.ndarray
    mean_check: np.ndarray
    m2_hat: np.ndarray | None
    m2_check: np.ndarray | None


def exact_moments(p, law, n, second_moments=None):
    """Run the deterministic moment recursions up to time ``n``.

    ``E[S_hat_n] = n m``; ``E[S_check_{k+1}] = (1-p) m + (1 - p/k) E[S_check_k]``.
    For centred steps ``E[S_hat_{k+1}^2] = (1 + 2p/k) E[S_hat_k^2] + sigma^2`` and
    the counterbalanced analogue with ``-2p/k``, both started at ``sigma^2``.

    ``second_moments`` defaults to "when the law is centred"; asking for them
    with a non-centred law raises ``ValueError``.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be positive")
    m, sigma2 = float(law.m), float(law.sigma2)
    centred = abs(m) <= 1e-12
    if second_moments is None:
        second_moments = centred
    if second_moments and not centred:
        raise ValueError("second-moment oracle requires centred law")

    mean_hat = m * np.arange(n + 1, dtype=float)
    mean_check = np.zeros(n + 1)
    mean_check[1] = m
    for k in range(1, n):
        mean_check[k + 1] = (1.0 - p) * m + (1.0 - p / k) * mean_check[k]

    m2_hat = m2_check = None
    if second_moments:
        m2_hat = np.zeros(n + 1)
        m2_check = np.zeros(n + 1)
        m2_hat[1] = m2_check[1] = sigma2
        for k in range(1, n):
            m2_hat[k + 1] = (1.0 + 2.0 * p / k) * m2_hat[k] + sigma2
            m2_check[k + 1] = (1.0 - 2.0 * p / k) * m2_check[k] + sigma2
    return MomentOracle(float(p), m, sigma2, mean_hat, mean_check, m2_hat, m2_check)

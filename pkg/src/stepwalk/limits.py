"""Gaussian limit of the coupled triplet: covariance kernels and samplers.

The limit is ``(B_t, t^p int_0^t s^-p dbeta^r_s, t^-p int_0^t s^p dbeta^c_s)`` for
three correlated standard Brownian drivers. Writing each component as
``t^-e int_0^t s^e dW`` with exponents ``e = (0, -p, p)`` gives every kernel as

    rho_cd s^-e_c t^-e_d min(s, t)^(1 + e_c + e_d) / (1 + e_c + e_d)

where ``rho`` is the driver correlation matrix.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from . import rng

COMPONENTS = ("B", "B_hat", "B_check")


class NumericalDegeneracyError(ArithmeticError):
    def __init__(self, minor, pivot):
        super().__init__(f"covariance not positive semidefinite: leading minor {minor} has pivot {pivot:.3e}")
        self.minor = minor
        self.pivot = pivot


@dataclass(frozen=True)
class LimitCovarianceModel:
    p: float
    sigma: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.p < 1.0:
            raise ValueError(f"limit model needs p in [0, 1), got {self.p!r}")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    def exponent(self, component):
        return {"B": 0.0, "B_hat": -self.p, "B_check": self.p}[component]

    def components(self):
        return COMPONENTS if self.p < 0.5 else ("B", "B_check")


@dataclass(frozen=True)
class TimeGrid:
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).ravel()
        if pts.size == 0 or not np.all(np.isfinite(pts)) or pts[0] < 0:
            raise ValueError("grid points must be finite and nonnegative")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)


def as_grid(grid):
    return grid if isinstance(grid, TimeGrid) else TimeGrid(np.atleast_1d(grid))


@dataclass(frozen=True)
class GaussianEnsemble:
    """Samples of shape ``(n_paths, len(components), len(grid))``."""

    grid: TimeGrid
    components: tuple
    samples: np.ndarray
    method: str
    seed: int

    def component(self, name):
        return self.samples[:, self.components.index(name), :]


def driver_correlation(p):
    """Correlation matrix of the drivers ``(B, beta^r, beta^c)``."""
    a = 1.0 - p
    b = (1.0 - p) / (1.0 + p)
    return np.array([[1.0, a, a], [a, 1.0, b], [a, b, 1.0]])


_IDX = {c: i for i, c in enumerate(COMPONENTS)}


def limit_covariance(model, i, j, s, t):
    """``E[i(s) j(t)]`` for components ``i``, ``j`` in ``{"B", "B_hat", "B_check"}``."""
    for c in (i, j):
        if c not in _IDX:
            raise ValueError(f"unknown component {c!r}")
        if c == "B_hat" and model.p >= 0.5:
            raise ValueError("the noise reinforced component needs p < 1/2")
    if s <= 0 or t <= 0:
        return 0.0
    ei, ej = model.exponent(i), model.exponent(j)
    rho = driver_correlation(model.p)[_IDX[i], _IDX[j]]
    a = 1.0 + ei + ej
    return model.sigma**2 * rho * s ** (-ei) * t ** (-ej) * min(s, t) ** a / a


def joint_covariance(model, grid, components=None):
    """Covariance matrix of all (component, time) pairs, component-major then time-ascending."""
    grid = as_grid(grid)
    components = tuple(model.components() if components is None else components)
    labels = [(c, t) for c in components for t in grid.points]
    C = np.empty((len(labels), len(labels)))
    for a, (ci, s) in enumerate(labels):
        for b, (cj, t) in enumerate(labels[a:], start=a):
            C[a, b] = C[b, a] = limit_covariance(model, ci, cj, s, t)
    return C, labels


def psd_cholesky(A, jitter=1e-10, tol=1e-12):
    """Lower factor ``L`` with ``L L^T = A`` for a positive semidefinite ``A``.

    Pivots within ``tol * max(diag)`` of zero give a zero column, so exactly
    repeated variables get identical rows. If a pivot is clearly negative the
    factorisation is retried once with ``jitter`` added to the diagonal;
    failure after that raises :class:`NumericalDegeneracyError`.
    """
    A = np.asarray(A, dtype=float)
    try:
        return _semidef_chol(A, tol)
    except NumericalDegeneracyError:
        return _semidef_chol(A + jitter * np.eye(len(A)), tol)


def _semidef_chol(A, tol):
    n = len(A)
    scale = max(float(np.max(np.abs(np.diag(A)))), 1e-300) if n else 1.0
    L = np.zeros_like(A)
    for k in range(n):
        piv = A[k, k] - np.dot(L[k, :k], L[k, :k])
        if piv < -tol * scale:
            raise NumericalDegeneracyError(k + 1, piv)
        if piv <= tol * scale:
            continue
        L[k, k] = math.sqrt(piv)
        L[k + 1:, k] = (A[k + 1:, k] - L[k + 1:, :k] @ L[k, :k]) / L[k, k]
    return L


def _batches(n_paths, size):
    return [np.arange(s, min(s + size, n_paths)) for s in range(0, n_paths, size)]


def sample_limit_triplet(model, grid, n_paths, seed, method="cholesky", steps=None, components=None):
    """Sample the limit triplet on a grid.

    ``method="cholesky"`` draws the exact joint Gaussian vector.
    ``method="euler"`` integrates the correlated drivers on ``steps`` substeps
    per unit time with left-point sums. The first substep of each stochastic
    integral uses its exact joint law, because ``s^-p`` is unbounded at 0.
    Values at ``t = 0`` are exactly 0.
    """
    grid = as_grid(grid)
    components = tuple(model.components() if components is None else components)
    pos = grid.points > 0
    tpos = grid.points[pos]
    out = np.zeros((int(n_paths), len(components), len(grid)))
    if tpos.size == 0:
        return GaussianEnsemble(grid, components, out, method, seed)
    if method == "cholesky":
        C, _ = joint_covariance(model, TimeGrid(tpos), components)
        L = psd_cholesky(C)
        cols = np.flatnonzero(pos)
        for ids in _batches(int(n_paths), 4096):
            Z = rng.normal_matrix(seed, ids, rng.LIMIT, L.shape[0])
            block = (Z @ L.T).reshape(len(ids), len(components), len(tpos))
            out[ids[0]:ids[-1] + 1, :, cols[0]:cols[-1] + 1] = block
    elif method == "euler":
        if steps is None or int(steps) < 1:
            raise ValueError("euler needs a positive number of substeps per unit time")
        full = _euler(model, tpos, int(n_paths), seed, int(steps))
        out[:, :, pos] = full[:, [_IDX[c] for c in components], :]
    else:
        raise ValueError(f"unknown method {method!r}")
    return GaussianEnsemble(grid, components, out, method, seed)


def _first_step_cov(p, d):
    """Joint covariance of (int_0^d dB, int_0^d s^-p dbeta^r, int_0^d s^p dbeta^c)."""
    e = np.array([0.0, -p, p])
    rho = driver_correlation(p)
    a = 1.0 + e[:, None] + e[None, :]
    return rho * d**a / a


def _euler(model, tpos, n_paths, seed, steps):
    p = model.p
    d = 1.0 / steps
    idx = np.floor(tpos * steps + 1e-9).astype(np.int64)
    if np.any(idx < 1):
        raise ValueError("grid points finer than one euler substep")
    M = int(idx.max())
    Lr = psd_cholesky(driver_correlation(p)) * math.sqrt(d)
    L1 = psd_cholesky(_first_step_cov(p, d))
    left = np.arange(1, M) * d
    w = np.stack([np.ones(M - 1), left ** (-p), left**p], axis=1)
    out = np.empty((n_paths, 3, len(tpos)))
    chunk = max(1, 2_000_000 // (3 * M))
    for ids in _batches(n_paths, chunk):
        Z = rng.normal_matrix(seed, ids, rng.LIMIT, 3 * M).reshape(len(ids), M, 3)
        first = Z[:, 0, :] @ L1.T
        rest = (Z[:, 1:, :] @ Lr.T) * w
        acc = np.cumsum(rest, axis=1)
        acc = np.concatenate([np.zeros((len(ids), 1, 3)), acc], axis=1) + first[:, None, :]
        vals = acc[:, idx - 1, :]
        vals[:, :, 1] *= tpos**p
        vals[:, :, 2] *= tpos ** (-p)
        out[ids] = np.transpose(vals, (0, 2, 1)) * model.sigma
    return out


def reinforced_bm_time_change(p, grid, n_paths, seed):
    """Noise reinforced Brownian motion as ``t^p B(t^(1-2p)) / sqrt(1-2p)``."""
    if not 0.0 < p < 0.5:
        raise ValueError("time-change representation needs p in (0, 1/2)")
    grid = as_grid(grid)
    t = grid.points
    pos = t > 0
    u = np.where(pos, t, 0.0) ** (1.0 - 2.0 * p) * pos
    du = np.diff(np.concatenate(([0.0], u)))
    out = np.zeros((int(n_paths), 1, len(t)))
    for ids in _batches(int(n_paths), 8192):
        Z = rng.normal_matrix(seed, ids, rng.LIMIT, len(t))
        bm = np.cumsum(Z * np.sqrt(du), axis=1)
        out[ids, 0, :] = np.where(pos, t**p, 0.0) * bm / math.sqrt(1.0 - 2.0 * p)
    return GaussianEnsemble(grid, ("B_hat",), out, "time-change", seed)


def write_ensemble_csv(fh, ens):
    fh.write("path_id,component,t,value\n")
    for r in range(ens.samples.shape[0]):
        for c, name in enumerate(ens.components):
            for g, t in enumerate(ens.grid.points):
                fh.write(f"{r},{name},{t:.17g},{ens.samples[r, c, g]:.17g}\n")


def kernel_json(model, grid, components=None):
    """JSON text of the joint covariance on a grid (17 significant digits)."""
    C, labels = joint_covariance(model, grid, components)
    payload = {
        "p": model.p,
        "sigma": model.sigma,
        "labels": [[c, float(t)] for c, t in labels],
        "covariance": [[float(format(x, ".17g")) for x in row] for row in C],
    }
    return json.dumps(payload)

"""Martingales, predictable brackets and scaled paths built from coupled walks.

Functions here accept either a :class:`~stepwalk.walks.CoupledPath` or a
:class:`~stepwalk.walks.PathBatch`; series are processed along the last axis,
so a batch gives one row per path.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .walks import grid_indices

REGIMES = ("diffusive", "martingale-reinforced", "martingale-counterbalanced", "critical")


@dataclass(frozen=True)
class MartingaleSeries:
    M_hat: np.ndarray
    M_check: np.ndarray | None


@dataclass(frozen=True)
class BracketSeries:
    """Predictable (co)variations; index 0 is time 0 and the increments are kept alongside."""

    qv_hat: np.ndarray
    qv_check: np.ndarray | None
    qv_mixed: np.ndarray | None
    inc_hat: np.ndarray
    inc_check: np.ndarray | None
    inc_mixed: np.ndarray | None


@dataclass(frozen=True)
class ScaledPath:
    regime: str
    n: int
    grid: np.ndarray
    values: dict
    sigma: float


def _check_coeffs(path, coeffs, need_check=False):
    if abs(coeffs.p - path.params.p) > 0.0:
        raise ValueError(f"coefficient table built for p={coeffs.p}, path has p={path.params.p}")
    if coeffs.n_max < path.n:
        raise ValueError(f"coefficient table too short: n_max={coeffs.n_max} < n={path.n}")
    if need_check and coeffs.a_check is None:
        raise ValueError("counterbalanced coefficients undefined at p=1")


def _need_aux(series):
    if series is None:
        raise ValueError("auxiliary series required (simulate with emit_aux=True)")
    return series


def martingale_transform(path, coeffs):
    """``M_hat_k = a_hat_k S_hat_k`` and ``M_check_k = a_check_k S_check_k`` (0 at k = 0)."""
    _check_coeffs(path, coeffs)
    if path.params.p >= 1.0:
        raise ValueError("martingale diagnostics are disabled at p=1")
    k = np.arange(path.n + 1)
    M_hat = coeffs.hat_at(k) * path.S_hat
    M_check = coeffs.check_at(k) * path.S_check
    return MartingaleSeries(M_hat, M_check)


def _cumulate(first, inc):
    lead = inc.shape[:-1]
    out = np.zeros(lead + (inc.shape[-1] + 2,))
    out[..., 1] = first
    np.cumsum(inc, axis=-1, out=out[..., 2:])
    out[..., 2:] += first
    return out


def _increments_diag(walk, V_hat, a, p, sigma2, n):
    km1 = np.arange(1, n, dtype=float)
    mean_step = walk[..., 1:n] / km1
    cond_var = (1.0 - p) * sigma2 - p * p * mean_step**2 + p * V_hat[..., 1:n] / km1
    return a[1:n] ** 2 * cond_var


def bracket_reinforced(path, coeffs):
    """``<M_hat>_n`` from its closed form: sigma^2 plus the conditional variances of later steps."""
    _check_coeffs(path, coeffs)
    V = _need_aux(path.V_hat)
    p, s2 = path.params.p, path.params.law.sigma2
    return _cumulate(s2, _increments_diag(path.S_hat, V, coeffs.a_hat, p, s2, path.n))


def bracket_counterbalanced(path, coeffs):
    """``<M_check>_n``; same form as the reinforced bracket with the counterbalanced walk."""
    _check_coeffs(path, coeffs, need_check=True)
    V = _need_aux(path.V_hat)
    p, s2 = path.params.p, path.params.law.sigma2
    return _cumulate(s2, _increments_diag(path.S_check, V, coeffs.a_check, p, s2, path.n))


def _increments_mixed(path, coeffs):
    n, p, s2 = path.n, path.params.p, path.params.law.sigma2
    G = _need_aux(path.G_check)
    ah, ac = coeffs.a_hat, coeffs.a_check
    km1 = np.arange(1, n, dtype=float)
    sh, sc, g = path.S_hat[..., 1:n], path.S_check[..., 1:n], G[..., 1:n]
    dh = ah[1:n] - ah[: n - 1]
    dc = ac[1:n] - ac[: n - 1]
    pa = sh * dh * sc * dc
    pb = sh * dh * (-p * sc / km1) * ac[1:n]
    pc = sc * dc * (p * sh / km1) * ah[1:n]
    pd = ah[1:n] * ac[1:n] * ((1.0 - p) * s2 - p * g / km1)
    return pa + pb + pc + pd


def bracket_mixed(path, coeffs):
    """``<M_hat, M_check>_n``; increments split into the four conditional cross terms."""
    _check_coeffs(path, coeffs, need_check=True)
    return _cumulate(path.params.law.sigma2, _increments_mixed(path, coeffs))


def brackets(path, coeffs):
    """All three brackets with their increments (counterbalanced ones omitted at p = 1)."""
    _check_coeffs(path, coeffs)
    V = _need_aux(path.V_hat)
    p, s2, n = path.params.p, path.params.law.sigma2, path.n
    inc_hat = _increments_diag(path.S_hat, V, coeffs.a_hat, p, s2, n)
    inc_check = inc_mixed = qv_check = qv_mixed = None
    if coeffs.a_check is not None:
        inc_check = _increments_diag(path.S_check, V, coeffs.a_check, p, s2, n)
        inc_mixed = _increments_mixed(path, coeffs)
        qv_check = _cumulate(s2, inc_check)
        qv_mixed = _cumulate(s2, inc_mixed)
    return BracketSeries(_cumulate(s2, inc_hat), qv_check, qv_mixed, inc_hat, inc_check, inc_mixed)


def scaled_brackets(path, coeffs, t=1.0, n=None):
    """Brackets of the rescaled martingales at time ``t`` (Gamma-ratio normalised).

    Returns ``{"hat", "check", "mixed"}``; their limits are ``sigma^2 t^(1-2p)/(1-2p)``,
    ``sigma^2 t^(1+2p)/(1+2p)`` and ``sigma^2 t (1-p)/(1+p)``.
    """
    n = path.n if n is None else int(n)
    k = int(grid_indices(n, [t])[0])
    if k > path.n:
        raise ValueError("path too short for the requested time")
    br = brackets(path, coeffs)
    p = coeffs.p
    out = {"hat": n ** (2 * p - 1) * coeffs.hat_norm**2 * br.qv_hat[..., k]}
    if br.qv_check is not None:
        out["check"] = n ** (-1 - 2 * p) * coeffs.check_norm**2 * br.qv_check[..., k]
        out["mixed"] = coeffs.hat_norm * coeffs.check_norm * br.qv_mixed[..., k] / n
    return out


def bracket_walk_cross(n, t, p, sigma2, coeffs, side):
    """Deterministic bracket between a rescaled martingale and the rescaled walk at time ``t``.

    ``side="reinforced"``: ``sigma^2 n^(p-1) (c_1 + (1-p) sum_{k=2}^{floor(nt)} c_k)``
    with ``c_k = Gamma(k)/Gamma(k+p)``. ``side="counterbalanced"``: the same with
    ``n^-(1+p)`` and ``Gamma(k)/Gamma(k-p)``. The time-1 term is the full
    ``sigma^2`` of the first step.
    """
    m = int(grid_indices(n, [t])[0])
    if m > coeffs.n_max:
        raise ValueError(f"floor(n t) = {m} exceeds the coefficient table")
    if m == 0:
        return 0.0
    if side == "reinforced":
        c = coeffs.gamma_hat()[:m]
        scale = float(n) ** (p - 1.0)
    elif side == "counterbalanced":
        c = coeffs.gamma_check()[:m]
        scale = float(n) ** (-1.0 - p)
    else:
        raise ValueError(f"unknown side {side!r}")
    return float(sigma2 * scale * (c[0] + (1.0 - p) * np.sum(c[1:])))


def scaled_paths(path, coeffs, grid=None, regime="diffusive", n=None):
    """Rescaled continuous-time versions of a path on a time grid.

    Components per regime:

    * ``diffusive``: ``S``, ``S_hat``, ``S_check`` at ``floor(n t)`` over ``sigma sqrt(n)``;
    * ``martingale-reinforced``: ``S`` as above and
      ``n^(p-1/2) c_{floor(nt)} S_hat_{floor(nt)} / sigma`` with ``c_k = Gamma(k)/Gamma(k+p)``;
    * ``martingale-counterbalanced``: ``S`` and ``n^(-p-1/2) c_k S_check_k / sigma``
      with ``c_k = Gamma(k)/Gamma(k-p)``;
    * ``critical`` (``p = 1/2`` only): ``S_hat_{floor(n^t)} / (sigma sqrt(log n) n^(t/2))``.

    ``grid=None`` keeps every index ``k/n`` for ``k = 0 .. path.n``.
    """
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}")
    n = path.n if n is None else int(n)
    sigma = float(np.sqrt(path.params.law.sigma2))
    p = path.params.p
    if grid is None:
        if regime == "critical":
            raise ValueError("critical scaling needs an explicit time grid")
        grid = np.arange(path.n + 1) / n
    grid = np.asarray(grid, dtype=float)

    if regime == "critical":
        if p != 0.5:
            raise ValueError("critical scaling is defined only at p = 0.5")
        idx = np.floor(float(n) ** grid * (1.0 + 1e-12)).astype(np.int64)
        if idx.max() > path.n:
            raise ValueError(f"path length {path.n} < floor(n^t) = {idx.max()}")
        norm = sigma * np.sqrt(np.log(n)) * float(n) ** (grid / 2.0)
        return ScaledPath(regime, n, grid, {"S_hat": path.S_hat[..., idx] / norm}, sigma)

    idx = grid_indices(n, grid)
    if idx.max() > path.n:
        raise ValueError(f"path length {path.n} < floor(n t) = {idx.max()}")
    root = sigma * np.sqrt(n)
    values = {"S": path.S[..., idx] / root}
    if regime == "diffusive":
        values["S_hat"] = path.S_hat[..., idx] / root
        values["S_check"] = path.S_check[..., idx] / root
    elif regime == "martingale-reinforced":
        _check_coeffs(path, coeffs)
        c = coeffs.hat_at(idx) * coeffs.hat_norm
        values["N_hat"] = float(n) ** p * c * path.S_hat[..., idx] / root
    else:
        _check_coeffs(path, coeffs, need_check=True)
        c = coeffs.check_at(idx) * coeffs.check_norm
        values["N_check"] = float(n) ** (-p) * c * path.S_check[..., idx] / root
    return ScaledPath(regime, n, grid, values, sigma)


def jump_sup(scaled, component=None):
    """Largest absolute jump between consecutive retained values of one component.

    ``component`` defaults to the martingale component of the regime.
    """
    if component is None:
        component = {"martingale-reinforced": "N_hat", "martingale-counterbalanced": "N_check",
                     "critical": "S_hat"}.get(scaled.regime, "S")
    v = scaled.values[component]
    return np.max(np.abs(np.diff(v, axis=-1)), axis=-1)


def write_brackets_csv(fh, path_ids, series, indices=None):
    """Rows ``path_id,k,qv_hat,qv_check,qv_mixed``; ``series`` is a :class:`BracketSeries` of a batch."""
    qh = np.atleast_2d(series.qv_hat)
    qc = None if series.qv_check is None else np.atleast_2d(series.qv_check)
    qm = None if series.qv_mixed is None else np.atleast_2d(series.qv_mixed)
    idx = np.arange(qh.shape[-1]) if indices is None else np.asarray(indices)
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(("path_id", "k", "qv_hat", "qv_check", "qv_mixed"))
    for r, pid in enumerate(path_ids):
        for k in idx:
            w.writerow([int(pid), int(k), format(qh[r, k], ".17g"),
                        "" if qc is None else format(qc[r, k], ".17g"),
                        "" if qm is None else format(qm[r, k], ".17g")])

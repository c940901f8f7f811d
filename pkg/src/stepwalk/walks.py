"""Coupled simulation of a random walk with its reinforced and counterbalanced versions.

At step ``i >= 2`` a Bernoulli(p) event decides whether the walk repeats an
earlier step chosen uniformly among ``1 .. i-1``. Repeats copy the step for the
reinforced walk and copy it with flipped sign for the counterbalanced one. A
repeated step is therefore always ``+-X[origin]`` for some fresh index
``origin``; the kernel tracks ``(origin, sign)`` and the walks are assembled by
one gather and a cumulative sum.
"""

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from . import rng
from .laws import StepLaw, truncate_law


@dataclass(frozen=True)
class ReinforcementParams:
    p: float
    law: StepLaw
    emit_aux: bool = True

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p!r}")


@dataclass(frozen=True)
class Events:
    """Per-step randomness: ``eps[i-1]`` and ``U[i-1]`` (1-based origin index, 0 if unused) and ``X[i-1]``."""

    eps: np.ndarray
    U: np.ndarray
    X: np.ndarray


@dataclass(frozen=True)
class PathBatch:
    """A block of coupled paths; every series has shape ``(n_paths, n + 1)`` and column 0 is zero.

    ``V_hat`` and ``G_check`` are ``None`` when the params had ``emit_aux`` off.
    """

    params: ReinforcementParams
    n: int
    seed: int
    path_ids: np.ndarray
    S: np.ndarray
    S_hat: np.ndarray
    S_check: np.ndarray
    V_hat: np.ndarray | None
    G_check: np.ndarray | None
    events: Events | None = None

    def __len__(self):
        return len(self.path_ids)

    def path(self, j):
        ev = None
        if self.events is not None:
            ev = Events(self.events.eps[j], self.events.U[j], self.events.X[j])
        aux = (lambda a: None if a is None else a[j])
        return CoupledPath(self.params, self.n, self.seed, int(self.path_ids[j]), self.S[j],
                           self.S_hat[j], self.S_check[j], aux(self.V_hat), aux(self.G_check), ev)


@dataclass(frozen=True)
class CoupledPath:
    """One realisation of the triplet; series have length ``n + 1`` starting at 0."""

    params: ReinforcementParams
    n: int
    seed: int
    path_id: int
    S: np.ndarray
    S_hat: np.ndarray
    S_check: np.ndarray
    V_hat: np.ndarray | None
    G_check: np.ndarray | None
    events: Events | None = None


@numba.njit(cache=True, nogil=True)
def _event_kernel(key_eps, key_u, p, n, origin, sign, eps, uidx):
    for b in range(origin.shape[0]):
        ke = key_eps[b]
        ku = key_u[b]
        origin[b, 0] = 0
        sign[b, 0] = 1
        eps[b, 0] = 0
        uidx[b, 0] = 0
        for i in range(2, n + 1):
            # U[i-1] is drawn at every step so the streams never depend on eps
            j = rng.index_below(ku, i, i - 1)
            uidx[b, i - 1] = j + 1
            if rng.uniform_at(ke, i) < p:
                eps[b, i - 1] = 1
                origin[b, i - 1] = origin[b, j]
                sign[b, i - 1] = -sign[b, j]
            else:
                eps[b, i - 1] = 0
                origin[b, i - 1] = i - 1
                sign[b, i - 1] = 1


def draw_events(p, n, seed, path_ids):
    """Raw event arrays for the given paths: origin, sign, eps, U (1-based) and step bits."""
    path_ids = np.asarray(path_ids, dtype=np.int64)
    B = len(path_ids)
    origin = np.empty((B, n), dtype=np.int32 if n < 2**31 else np.int64)
    sign = np.empty((B, n), dtype=np.int8)
    eps = np.empty((B, n), dtype=np.int8)
    uidx = np.empty((B, n), dtype=origin.dtype)
    _event_kernel(rng.derive_keys(seed, path_ids, rng.EPS), rng.derive_keys(seed, path_ids, rng.UNIF),
                  float(p), int(n), origin, sign, eps, uidx)
    bits = rng.bits_matrix(rng.derive_keys(seed, path_ids, rng.STEP), n, start=1)
    return origin, sign, eps, uidx, bits


def _walk(steps):
    out = np.zeros(steps.shape[:-1] + (steps.shape[-1] + 1,))
    np.cumsum(steps, axis=-1, out=out[..., 1:])
    return out


@numba.njit(cache=True, nogil=True)
def _walk_kernel(x, origin, sign, S, S_hat, S_check, V_hat, G_check, aux):
    for b in range(x.shape[0]):
        s = sh = sc = v = g = 0.0
        S[b, 0] = S_hat[b, 0] = S_check[b, 0] = 0.0
        if aux:
            V_hat[b, 0] = G_check[b, 0] = 0.0
        for i in range(x.shape[1]):
            xi = x[b, i]
            xh = x[b, origin[b, i]]
            s += xi
            sh += xh
            S[b, i + 1] = s
            S_hat[b, i + 1] = sh
            if sign[b, i] > 0:
                sc += xh
            else:
                sc -= xh
            S_check[b, i + 1] = sc
            if aux:
                q = xh * xh
                v += q
                if sign[b, i] > 0:
                    g += q
                else:
                    g -= q
                V_hat[b, i + 1] = v
                G_check[b, i + 1] = g


def _assemble(params, n, seed, path_ids, origin, sign, eps, uidx, bits, record_events):
    x = np.ascontiguousarray(params.law.sample_bits(bits), dtype=np.float64)
    B = x.shape[0]
    S, S_hat, S_check = (np.empty((B, n + 1)) for _ in range(3))
    if params.emit_aux:
        V_hat, G_check = np.empty((B, n + 1)), np.empty((B, n + 1))
    else:
        V_hat = G_check = np.empty((0, 0))
    _walk_kernel(x, origin, sign, S, S_hat, S_check, V_hat, G_check, params.emit_aux)
    if not params.emit_aux:
        V_hat = G_check = None
    events = Events(eps.astype(bool), uidx.astype(np.int64), x) if record_events else None
    return PathBatch(params, n, seed, np.asarray(path_ids, dtype=np.int64), S, S_hat, S_check,
                     V_hat, G_check, events)


def simulate_batch(params, n, seed, path_ids, record_events=False):
    """Full coupled paths for the listed path indices of master seed ``seed``."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be positive")
    ev = draw_events(params.p, n, seed, path_ids)
    return _assemble(params, n, seed, path_ids, *ev, record_events)


def simulate_coupled(params, n, seed, path_id=0, record_events=False):
    """One coupled path (path index ``path_id`` of master seed ``seed``)."""
    return simulate_batch(params, n, seed, [path_id], record_events).path(0)


def simulate_decomposed(params, K, n, seed, path_id=0):
    """Coupled paths for X, its bounded part and its tail part, on one event stream.

    The three returned paths share every Bernoulli event, uniform index and
    step bit, so ``total = low + high`` holds index by index up to round-off.
    Requires a centred law, for which the two centring constants cancel.
    """
    if not params.law.centred:
        raise ValueError("decomposition requires a centred law")
    low_law, high_law = truncate_law(params.law, K)
    ids = [path_id]
    origin, sign, eps, uidx, bits = draw_events(params.p, int(n), seed, ids)
    out = []
    for law in (params.law, low_law, high_law):
        sub = ReinforcementParams(params.p, law, params.emit_aux)
        out.append(_assemble(sub, int(n), seed, ids, origin, sign, eps, uidx, bits, False).path(0))
    return tuple(out)


def replay_events(eps, U, X):
    """Rebuild (S, S_hat, S_check) by the step-by-step recursion from explicit events.

    ``eps[i-1]`` and ``U[i-1]`` describe step ``i``; ``U`` holds 1-based indices
    and entries at steps without a repeat are ignored.
    """
    n = len(X)
    xh = np.empty(n)
    xc = np.empty(n)
    for i in range(n):
        if i > 0 and eps[i]:
            j = int(U[i]) - 1
            xh[i] = xh[j]
            xc[i] = -xc[j]
        else:
            xh[i] = xc[i] = X[i]
    return _walk(np.asarray(X, dtype=float)), _walk(xh), _walk(xc)


def default_threads():
    return int(os.environ.get("RWALK_THREADS", "1"))


def path_blocks(n_paths, batch_size):
    return [np.arange(s, min(s + batch_size, n_paths)) for s in range(0, n_paths, batch_size)]


def suggested_batch(n, budget=4_000_000):
    return max(1, min(4096, budget // max(int(n), 1)))


def map_paths(fn, params, n, n_paths, seed, threads=None, batch_size=None):
    """Apply ``fn(PathBatch)`` to consecutive blocks of paths; results come back in path order.

    Blocks depend only on ``batch_size`` (never on ``threads``), so the output
    is bit-identical for any thread count.
    """
    threads = default_threads() if threads is None else int(threads)
    batch_size = suggested_batch(n) if batch_size is None else int(batch_size)
    blocks = path_blocks(int(n_paths), batch_size)

    def work(ids):
        return fn(simulate_batch(params, n, seed, ids))

    if threads <= 1:
        return [work(ids) for ids in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, blocks))


def grid_indices(n, grid):
    """``floor(n t)`` for each grid time, guarded against round-off just below integers."""
    t = np.asarray(grid, dtype=float)
    return np.floor(n * t * (1.0 + 1e-12)).astype(np.int64)


def simulate_ensemble(params, n, n_paths, seed, indices=None, threads=None, batch_size=None):
    """Ensemble values at retained indices (all of ``0..n`` by default).

    Returns a dict of ``(n_paths, len(indices))`` arrays keyed by series name.
    """
    idx = np.arange(n + 1) if indices is None else np.asarray(indices, dtype=np.int64)
    names = ("S", "S_hat", "S_check") + (("V_hat", "G_check") if params.emit_aux else ())

    def keep(batch):
        return {k: getattr(batch, k)[:, idx] for k in names}

    parts = map_paths(keep, params, n, n_paths, seed, threads, batch_size)
    out = {k: np.concatenate([part[k] for part in parts]) for k in names}
    out["k"] = idx
    return out


CSV_COLUMNS = ("path_id", "k", "S", "S_hat", "S_check", "V_hat", "G_check")


def _fmt(x):
    return format(float(x), ".17g")


def write_paths_csv(fh, path_ids, indices, series, emit_aux):
    """Write rows ``path_id,k,S,S_hat,S_check,V_hat,G_check`` (aux columns empty when off)."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r, pid in enumerate(path_ids):
        for c, k in enumerate(indices):
            row = [int(pid), int(k), _fmt(series["S"][r, c]), _fmt(series["S_hat"][r, c]),
                   _fmt(series["S_check"][r, c])]
            if emit_aux:
                row += [_fmt(series["V_hat"][r, c]), _fmt(series["G_check"][r, c])]
            else:
                row += ["", ""]
            w.writerow(row)


def read_paths_csv(fh):
    """Inverse of :func:`write_paths_csv`: ``(path_ids, indices, series)``."""
    rows = list(csv.DictReader(fh))
    if not rows or tuple(rows[0].keys()) != CSV_COLUMNS:
        raise ValueError("not a path dump: expected columns " + ",".join(CSV_COLUMNS))
    path_ids = sorted({int(r["path_id"]) for r in rows})
    indices = sorted({int(r["k"]) for r in rows})
    pos_p = {p: i for i, p in enumerate(path_ids)}
    pos_k = {k: i for i, k in enumerate(indices)}
    series = {}
    for name in CSV_COLUMNS[2:]:
        if rows[0][name] == "":
            continue
        arr = np.empty((len(path_ids), len(indices)))
        for r in rows:
            arr[pos_p[int(r["path_id"])], pos_k[int(r["k"])]] = float(r[name])
        series[name] = arr
    return np.array(path_ids), np.array(indices), series

"""Statistical checks confronting simulated ensembles with their limits.

Expectation and L2 statements are checked through ensemble means with
analytic standard errors. In-probability statements (bracket limits) use
medians with bootstrap standard errors. Almost-sure statements enter only
through these finite-n consequences.
"""

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from . import rng
from .coefficients import build_coefficients
from .diagnostics import brackets, martingale_transform, scaled_brackets, scaled_paths
from .laws import rademacher
from .limits import limit_covariance
from .moments import exact_moments
from .stats import (Check, EnsembleSummary, TestReport, ensemble_rows, kolmogorov_sf, ks_statistic,
                    mean_se, median_boot, var_se)
from .walks import ReinforcementParams, map_paths, replay_events, simulate_batch

_LIMIT_NAME = {"S": "B", "S_hat": "B_hat", "S_check": "B_check",
               "B": "B", "B_hat": "B_hat", "B_check": "B_check"}


def covariance_discrepancy(summary, model, bias=0.0, z_max=4.0, suite="covariance", config=None, seed=0):
    """Compare every covariance entry of ``summary`` with the limit kernel.

    An entry passes when ``|estimate - kernel| <= z_max se + bias``.
    """
    labels = summary.labels
    for c, _ in labels:
        if c not in _LIMIT_NAME:
            raise ValueError(f"component {c!r} has no limit counterpart")
    C, se = summary.cov, summary.cov_se
    checks = []
    for a in range(len(labels)):
        for b in range(a, len(labels)):
            (ci, s), (cj, t) = labels[a], labels[b]
            target = limit_covariance(model, _LIMIT_NAME[ci], _LIMIT_NAME[cj], s, t)
            checks.append(Check(f"cov[{ci}({s:g}),{cj}({t:g})]", "covariance", target, C[a, b],
                                se[a, b], bias, "z+tol", z_max))
    cfg = {"p": model.p, "sigma": model.sigma, "bias": bias, "z_max": z_max, "n_paths": summary.n_paths}
    cfg.update(config or {})
    return TestReport(suite, cfg, seed, checks)


def jitter_lattice(samples, spacing, seed):
    """Spread lattice-valued samples uniformly over their cells (seeded, deterministic)."""
    x = np.asarray(samples, dtype=float)
    keys = rng.derive_keys(seed, [0], rng.RESAMPLE)
    u = rng.bits_to_uniform(rng.bits_matrix(keys, len(x)))[0] - 0.5
    return x + spacing * u


def marginal_gaussian_test(samples, target_variance, rel_tol=0.05, alpha=0.01, lattice=None, seed=0,
                           name="marginal"):
    """Variance ratio and one-sample KS test against ``N(0, target_variance)``.

    ``lattice`` gives the spacing of lattice-valued samples; they are then
    jittered uniformly within their cells before the KS test, since a KS
    distance between a lattice law and a continuous one never vanishes.
    """
    if not target_variance > 0:
        raise ValueError("target variance must be positive")
    x = np.asarray(samples, dtype=float)
    if len(x) < 1000:
        raise ValueError("marginal test needs at least 1000 samples")
    v, v_se = var_se(x)
    ratio = Check(f"{name}:variance-ratio", "var/target", 1.0, v / target_variance,
                  v_se / target_variance, rel_tol, "rel")
    y = x if lattice is None else jitter_lattice(x, lattice, seed)
    D = ks_statistic(y, math.sqrt(target_variance))
    pval = kolmogorov_sf(math.sqrt(len(y)) * D)
    ks = Check(f"{name}:ks", "ks_pvalue", alpha, pval, math.nan, alpha, "bool", flag=pval > alpha)
    cfg = {"target_variance": target_variance, "rel_tol": rel_tol, "alpha": alpha, "n": len(x),
           "ks_distance": D, "lattice": lattice}
    return TestReport("marginal-gaussian", cfg, seed, [ratio, ks])


@dataclass(frozen=True)
class GrowthFit:
    slope: float
    intercept: float
    rss: float
    log_slope: float | None = None
    log_intercept: float | None = None
    log_rss: float | None = None

    @property
    def log_preferred(self):
        return self.log_rss is not None and self.log_rss < self.rss


def _lsq(x, y):
    A = np.stack([np.ones_like(x), x], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    r = y - A @ coef
    return float(coef[1]), float(coef[0]), float(r @ r)


def growth_exponent_fit(pairs, critical=False):
    """Least-squares slope of ``log value`` against ``log n``.

    With ``critical=True`` a second fit of ``log(value / log n)`` is made and
    both residual sums of squares are reported.
    """
    pairs = sorted((float(n), float(v)) for n, v in pairs)
    if len(pairs) < 5:
        raise ValueError("growth fit needs at least 5 points")
    n = np.array([a for a, _ in pairs])
    v = np.array([b for _, b in pairs])
    if np.any(n <= 1) or np.any(v <= 0):
        raise ValueError("growth fit needs n > 1 and positive values")
    x = np.log(n)
    fit = _lsq(x, np.log(v))
    if not critical:
        return GrowthFit(*fit)
    return GrowthFit(*fit, *_lsq(x, np.log(v) - np.log(x)))


def sup_second_moments(params, ns, n_paths, seed, threads=None):
    """``E[sup_{k<=n} S_hat_k^2]`` for each ``n`` in ``ns`` from prefixes of one ensemble."""
    ns = np.asarray(sorted(int(n) for n in ns))

    def stat(batch):
        run = np.maximum.accumulate(batch.S_hat**2, axis=1)
        return run[:, ns]

    vals = np.concatenate(map_paths(stat, params, int(ns[-1]), n_paths, seed, threads))
    means = vals.mean(0)
    ses = vals.std(0, ddof=1) / math.sqrt(len(vals))
    return ns, means, ses


def _endpoints(params, n, n_paths, seed, threads, names=("S", "S_hat", "S_check", "G_check")):
    def stat(batch):
        return np.stack([getattr(batch, k)[:, -1] for k in names], axis=1)

    out = np.concatenate(map_paths(stat, params, n, n_paths, seed, threads))
    return {k: out[:, i] for i, k in enumerate(names)}


def lln_report(params, n, n_paths, seed, rel_tol=0.05, z_max=3.0, threads=None):
    """Ensemble means of the law-of-large-numbers ratios at time ``n``.

    ``S_check_n/n`` against ``(1-p)m/(1+p)``; ``G_check_n/n`` against
    ``(1-p)E[X^2]/(1+p)``; for centred laws ``S_hat_n`` over ``n^(1-p)``
    (``sqrt(n) log n`` at ``p = 1/2``, ``n`` above) against 0, otherwise
    ``S_hat_n/n`` against ``m``.
    """
    p, law = params.p, params.law
    if not params.emit_aux:
        params = ReinforcementParams(p, law, True)
    ends = _endpoints(params, n, n_paths, seed, threads)
    checks = []

    def add(name, values, target):
        est, se = mean_se(values)
        if target != 0:
            checks.append(Check(name, "mean", target, est, se, rel_tol, "rel"))
        else:
            checks.append(Check(name, "mean", target, est, se, 0.0, "z", z_max))

    add("counterbalanced-lln", ends["S_check"] / n, (1 - p) * law.m / (1 + p))
    add("squared-counterbalanced-lln", ends["G_check"] / n, (1 - p) * law.m2 / (1 + p))
    if law.centred:
        if p < 0.5:
            scale, label = n ** (1 - p), "n^(1-p)"
        elif p == 0.5:
            scale, label = math.sqrt(n) * math.log(n), "sqrt(n) log n"
        else:
            scale, label = float(n), "n"
        add(f"reinforced-lln[{label}]", ends["S_hat"] / scale, 0.0)
    else:
        add("reinforced-lln[n]", ends["S_hat"] / n, law.m)
    cfg = {"p": p, "law": law.kind, "n": n, "n_paths": n_paths, "rel_tol": rel_tol, "z_max": z_max,
           "method": "ensemble means (a.s. limits checked through their L1 consequences)"}
    return TestReport("lln", cfg, seed, checks)


def superdiffusive_report(p, law, ns, n_paths, seed, oracle_levels=(2**14, 2**15), z_max=3.0,
                          threads=None):
    """Plateau of ``Var(M_hat_n)`` and the L2 Cauchy gaps for ``p > 1/2``.

    ``ns`` must be consecutive dyadic levels; gaps are
    ``E[(M_hat_2n - M_hat_n)^2]`` for each ``n`` whose double is in ``ns``.
    """
    if not 0.5 < p < 1.0:
        raise ValueError("superdiffusive report needs 1/2 < p < 1")
    if not law.centred:
        raise ValueError("superdiffusive report needs a centred law")
    ns = sorted(int(n) for n in ns)
    top = max(ns[-1], *oracle_levels)
    coeffs = build_coefficients(p, top)
    orc = exact_moments(p, law, top)
    ovar = lambda n: coeffs.a_hat[n - 1] ** 2 * orc.m2_hat[n]  # noqa: E731
    lo, hi = oracle_levels
    ratio = ovar(hi) / ovar(lo)
    checks = [Check(f"oracle-plateau[{lo}->{hi}]", "var ratio", 1.025, ratio, 0.0, 0.025, "abs")]
    ladder = [ovar(n) for n in ns]
    checks.append(Check("oracle-increasing", "var(M_hat_n) nondecreasing", 1.0,
                        float(np.all(np.diff(ladder) >= 0)), 0.0, 0.0, "bool",
                        flag=bool(np.all(np.diff(ladder) >= 0))))

    params = ReinforcementParams(p, law, False)
    idx = np.asarray(ns)
    a = coeffs.a_hat[idx - 1]

    def stat(batch):
        return batch.S_hat[:, idx] * a

    M = np.concatenate(map_paths(stat, params, ns[-1], n_paths, seed, threads))
    for j, n in enumerate(ns):
        v, se = var_se(M[:, j])
        checks.append(Check(f"mc-variance[n={n}]", "var(M_hat_n)", ovar(n), v, se, 0.0, "z", z_max))
    gaps = []
    for j in range(len(ns) - 1):
        if ns[j + 1] == 2 * ns[j]:
            g, se = mean_se((M[:, j + 1] - M[:, j]) ** 2)
            gaps.append((ns[j], g, se))
    dec = all(b[1] < a_[1] for a_, b in zip(gaps, gaps[1:]))
    worst = max((b[1] / a_[1] for a_, b in zip(gaps, gaps[1:])), default=math.nan)
    checks.append(Check(f"cauchy-gap-decreasing[{len(gaps)} levels]", "max successive gap ratio", 1.0,
                        worst, 0.0, 0.0, "bool", flag=dec and len(gaps) >= 3))
    cfg = {"p": p, "law": law.kind, "ns": ns, "n_paths": n_paths, "oracle_levels": list(oracle_levels),
           "gaps": [[n, g, s] for n, g, s in gaps]}
    return TestReport("superdiffusive", cfg, seed, checks)


@dataclass(frozen=True)
class OriginEstimate:
    deltas: np.ndarray
    prob: np.ndarray
    se: np.ndarray


def origin_control(p, law, n, n_paths, delta, eps, seed, threads=None):
    """Monte Carlo ``P(max_{k <= floor(n delta)} |S_check_k| / sqrt(n) > eps)``.

    ``delta`` may be a list; all values share one ensemble of paths of
    length ``floor(n max(delta))``.
    """
    if not law.centred:
        raise ValueError("origin control needs a centred law")
    deltas = np.atleast_1d(np.asarray(delta, dtype=float))
    if np.any(deltas <= 0) or np.any(deltas > 1):
        raise ValueError("delta must lie in (0, 1]")
    ks = np.floor(n * deltas * (1 + 1e-12)).astype(np.int64)
    m = max(int(ks.max()), 1)
    params = ReinforcementParams(p, law, False)
    thresh = eps * math.sqrt(n)

    def stat(batch):
        run = np.maximum.accumulate(np.abs(batch.S_check), axis=1)
        return run[:, ks] > thresh

    hits = np.concatenate(map_paths(stat, params, m, n_paths, seed, threads))
    prob = hits.mean(0)
    se = np.sqrt(prob * (1 - prob) / len(hits))
    return OriginEstimate(deltas, prob, se)


def origin_report(p, law, n, n_paths, deltas, eps, seed, z_max=2.0, threads=None):
    """One-sided checks that the exceedance probability halves at least as fast as ``delta``."""
    ds = sorted(float(d) for d in deltas)
    est = origin_control(p, law, n, n_paths, ds, eps, seed, threads)
    checks = []
    for j in range(len(ds) - 1):
        small, big = est.prob[j], est.prob[j + 1]
        r = ds[j] / ds[j + 1]
        se = math.sqrt(est.se[j] ** 2 + (r * est.se[j + 1]) ** 2)
        d = small - r * big
        checks.append(Check(f"linear-decay[{ds[j]:g}<={r:g}*{ds[j + 1]:g}]", "P(d) - (d/d') P(d')", 0.0,
                            d, se, 0.0, "bool", z_max, flag=d <= z_max * se + 1e-15))
        checks.append(Check(f"monotone[{ds[j]:g}<={ds[j + 1]:g}]", "P(d) - P(d')", 0.0, small - big,
                            math.hypot(est.se[j], est.se[j + 1]), 0.0, "bool", z_max,
                            flag=small - big <= z_max * math.hypot(est.se[j], est.se[j + 1]) + 1e-15))
    cfg = {"p": p, "law": law.kind, "n": n, "n_paths": n_paths, "deltas": ds, "eps": eps,
           "probabilities": est.prob.tolist()}
    return TestReport("origin-control", cfg, seed, checks)


def conditional_step_moments_test(prefix, resamples, seed, z_max=3.0):
    """Resample step ``n+1`` given a fixed prefix and compare with the conditional moments.

    Targets: ``E[X_hat] = p S_hat_n/n + (1-p) m``, ``E[X_check] = -p S_check_n/n + (1-p) m``
    and ``E[X_hat^2] = p V_hat_n/n + (1-p) E[X^2]``. Only ``(eps, U, X)`` of the
    new step are redrawn, from a dedicated stream.
    """
    p, law, n = prefix.params.p, prefix.params.law, prefix.n
    xh = np.diff(prefix.S_hat)
    xc = np.diff(prefix.S_check)
    V = prefix.V_hat[-1] if prefix.V_hat is not None else float(xh @ xh)
    R = int(resamples)
    keys = rng.derive_keys(seed, np.arange(R), rng.RESAMPLE)
    bits = rng.bits_matrix(keys, 3, start=3 * n)
    rep = rng.bits_to_uniform(bits[:, 0]) < p
    U = (((bits[:, 1] >> np.uint64(32)) * np.uint64(n)) >> np.uint64(32)).astype(np.int64)
    X = law.sample_bits(bits[:, 2])
    new_hat = np.where(rep, xh[U], X)
    new_check = np.where(rep, -xc[U], X)
    targets = [("reinforced-step-mean", new_hat, p * prefix.S_hat[-1] / n + (1 - p) * law.m),
               ("counterbalanced-step-mean", new_check, -p * prefix.S_check[-1] / n + (1 - p) * law.m),
               ("reinforced-step-square", new_hat**2, p * V / n + (1 - p) * law.m2)]
    checks = []
    for name, vals, target in targets:
        est, se = mean_se(vals)
        checks.append(Check(name, "conditional mean", target, est, se, 0.0, "z", z_max))
    cfg = {"p": p, "law": law.kind, "n": n, "resamples": R, "path_seed": prefix.seed,
           "path_id": prefix.path_id}
    return TestReport("conditional-moments", cfg, seed, checks)


def isometry_report(p, law, ns, n_paths, seed, z_max=3.0, threads=None):
    """Paired means of ``M_n^2 - <M>_n`` (reinforced, counterbalanced, mixed) against 0."""
    ns = sorted(int(n) for n in ns)
    coeffs = build_coefficients(p, ns[-1])
    params = ReinforcementParams(p, law, True)
    idx = np.asarray(ns)

    def stat(batch):
        mt = martingale_transform(batch, coeffs)
        br = brackets(batch, coeffs)
        mh, mc = mt.M_hat[:, idx], mt.M_check[:, idx]
        return np.stack([mh**2 - br.qv_hat[:, idx], mc**2 - br.qv_check[:, idx],
                         mh * mc - br.qv_mixed[:, idx]], axis=1)

    D = np.concatenate(map_paths(stat, params, ns[-1], n_paths, seed, threads))
    checks = []
    for side, name in enumerate(("reinforced", "counterbalanced", "mixed")):
        for j, n in enumerate(ns):
            est, se = mean_se(D[:, side, j])
            checks.append(Check(f"isometry-{name}[p={p:g},n={n}]", "mean(M^2 - <M>)", 0.0, est, se,
                                0.0, "z", z_max))
    cfg = {"p": p, "law": law.kind, "ns": ns, "n_paths": n_paths, "z_max": z_max}
    return TestReport("isometry", cfg, seed, checks)


def bracket_medians(p, law, n, n_paths, seed, t=1.0, threads=None):
    """Per-path scaled brackets at time ``t``: dict of arrays ``hat``/``check``/``mixed``."""
    coeffs = build_coefficients(p, n)
    params = ReinforcementParams(p, law, True)
    parts = map_paths(lambda b: scaled_brackets(b, coeffs, t), params, n, n_paths, seed, threads,
                      batch_size=8)
    return {k: np.concatenate([part[k] for part in parts]) for k in parts[0]}


def scaled_summary(params, n, n_paths, seed, grid, regime="diffusive", threads=None, coeffs=None):
    """:class:`EnsembleSummary` of scaled paths on ``grid``, merged in path order."""
    def stat(batch):
        sp = scaled_paths(batch, coeffs, grid, regime, n)
        labels, rows = ensemble_rows(sp)
        return EnsembleSummary.empty(labels).update(rows)

    n_len = n if regime != "critical" else int(math.floor(n ** max(grid) * (1 + 1e-12)))
    parts = map_paths(stat, params, n_len, n_paths, seed, threads)
    out = parts[0]
    for part in parts[1:]:
        out = out.merge(part)
    return out


def enumerate_rademacher(p, n):
    """Exact law of ``(S_n, S_hat_n, S_check_n)`` by enumerating every event tuple.

    Walks are rebuilt with :func:`~stepwalk.walks.replay_events`; ``U`` is
    enumerated at every step ``i >= 2`` (uniform on ``1..i-1``) whether or
    not it is used. Returns ``{(s, s_hat, s_check): probability}``.
    """
    law = defaultdict(float)
    xs = list(itertools.product((-1.0, 1.0), repeat=n))
    es = list(itertools.product((0, 1), repeat=n - 1))
    us = list(itertools.product(*[range(1, i) for i in range(2, n + 1)]))
    pu = 1.0 / math.factorial(n - 1)
    for e in es:
        k = sum(e)
        pe = p**k * (1 - p) ** (n - 1 - k)
        eps = (0,) + e
        for u in us:
            U = (0,) + u
            for x in xs:
                S, Sh, Sc = replay_events(eps, U, x)
                law[(S[-1], Sh[-1], Sc[-1])] += pe * pu * 0.5**n
    return dict(law)


def markov_rademacher(p, n):
    """Same law as :func:`enumerate_rademacher` by forward propagation of pair counts.

    The state holds ``S_k`` and the counts of the four possible pairs
    ``(X_hat_j, X_check_j)``; a repeat picks a pair with probability
    proportional to its count and appends ``(a, -b)``.
    """
    pairs = ((1, 1), (1, -1), (-1, 1), (-1, -1))
    state = {(x, (1 if x == 1 else 0, 0, 0, 1 if x == -1 else 0)): 0.5 for x in (-1, 1)}
    for k in range(1, n):
        nxt = defaultdict(float)
        for (s, c), pr in state.items():
            for x in (-1, 1):
                fresh = list(c)
                fresh[pairs.index((x, x))] += 1
                nxt[(s + x, tuple(fresh))] += pr * 0.5 * (1 - p)
                for j, (a, b) in enumerate(pairs):
                    if c[j] == 0:
                        continue
                    rep = list(c)
                    rep[pairs.index((a, -b))] += 1
                    nxt[(s + x, tuple(rep))] += pr * 0.5 * p * c[j] / k
        state = nxt
    law = defaultdict(float)
    for (s, c), pr in state.items():
        sh = sum(cnt * a for cnt, (a, _) in zip(c, pairs))
        sc = sum(cnt * b for cnt, (_, b) in zip(c, pairs))
        law[(float(s), float(sh), float(sc))] += pr
    return dict(law)


def law_moments(law):
    """Means and second moments of the three coordinates of a finite joint law."""
    out = np.zeros((2, 3))
    for val, pr in law.items():
        v = np.array(val)
        out[0] += pr * v
        out[1] += pr * v * v
    return out


def enumeration_report(ps=(0.25, 0.5, 0.75), n_max=6, tol=1e-12):
    checks = []
    for p in ps:
        for n in range(1, n_max + 1):
            enum = enumerate_rademacher(p, n)
            mark = markov_rademacher(p, n)
            keys = set(enum) | set(mark)
            gap = max(abs(enum.get(k, 0.0) - mark.get(k, 0.0)) for k in keys)
            checks.append(Check(f"outcome-law[p={p:g},n={n}]", "max |P_enum - P_markov|", 0.0, gap, 0.0,
                                tol, "abs"))
            checks.append(Check(f"total-mass[p={p:g},n={n}]", "sum P", 1.0, sum(enum.values()), 0.0, tol,
                                "abs"))
            orc = exact_moments(p, rademacher(), n)
            mom = law_moments(enum)
            for name, est, target in (("mean_hat", mom[0, 1], orc.mean_hat[n]),
                                      ("mean_check", mom[0, 2], orc.mean_check[n]),
                                      ("m2_hat", mom[1, 1], orc.m2_hat[n]),
                                      ("m2_check", mom[1, 2], orc.m2_check[n])):
                checks.append(Check(f"{name}[p={p:g},n={n}]", "enumerated moment vs recursion", target, est,
                                    0.0, tol, "abs"))
    for p in ps:
        batch = simulate_batch(ReinforcementParams(p, rademacher(), False), n_max, 0, np.arange(500),
                               record_events=True)
        ok = True
        for j in range(len(batch)):
            ev = batch.events
            S, Sh, Sc = replay_events(ev.eps[j], ev.U[j], ev.X[j])
            ok &= (np.array_equal(S, batch.S[j]) and np.array_equal(Sh, batch.S_hat[j])
                   and np.array_equal(Sc, batch.S_check[j]))
        checks.append(Check(f"simulator-replay[p={p:g},n={n_max}]", "500 simulated paths equal their replay",
                            1.0, float(ok), 0.0, 0.0, "bool", flag=bool(ok)))
    half = exact_moments(0.5, rademacher(), 2)
    checks.append(Check("E[S_hat_2^2] at p=0.5", "recursion", 3.0, half.m2_hat[2], 0.0, tol, "abs"))
    checks.append(Check("E[S_check_2^2] at p=0.5", "recursion", 1.0, half.m2_check[2], 0.0, tol, "abs"))
    return TestReport("enumeration", {"ps": list(ps), "n_max": n_max, "tol": tol}, 0, checks)


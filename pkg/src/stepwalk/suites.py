"""Named verification suites with their default configurations.

Every suite is a function ``(config, seed, threads) -> TestReport``; the
defaults of each config dataclass are the desk-scale settings used by the
acceptance tests. Seeds are always explicit.
"""

import dataclasses
import io
import math
from dataclasses import dataclass

import numpy as np

from .coefficients import build_coefficients
from .diagnostics import bracket_walk_cross
from .laws import StepLaw, parse_law, truncate_law
from .limits import (LimitCovarianceModel, TimeGrid, joint_covariance, reinforced_bm_time_change,
                     sample_limit_triplet)
from .moments import exact_moments
from .stats import Check, EnsembleSummary, TestReport, ensemble_rows, median_boot, var_se
from .verify import (bracket_medians, conditional_step_moments_test, covariance_discrepancy,
                     enumeration_report, growth_exponent_fit, isometry_report, lln_report,
                     marginal_gaussian_test, origin_report, scaled_summary, sup_second_moments,
                     superdiffusive_report)
from .walks import ReinforcementParams, simulate_coupled, simulate_decomposed, simulate_ensemble


@dataclass(frozen=True)
class EnumerationConfig:
    ps: tuple = (0.25, 0.5, 0.75)
    n_max: int = 6
    tol: float = 1e-12


@dataclass(frozen=True)
class ReinforcedVarianceConfig:
    p: float = 0.25
    law: str = "rademacher"
    n: int = 4096
    n_paths: int = 20000
    z_max: float = 3.0
    rel_tol: float = 0.05


@dataclass(frozen=True)
class CounterbalancedVarianceConfig:
    p: float = 0.75
    law: str = "rademacher"
    n: int = 4096
    n_paths: int = 20000
    z_max: float = 3.0
    rel_tol: float = 0.03
    ks_alpha: float = 0.01
    full_n: int = 10000
    full_paths: int = 20000
    full_rel_tol: float = 0.05


@dataclass(frozen=True)
class TripletConfig:
    p: float = 0.3
    law: str = "rademacher"
    n: int = 4096
    n_paths: int = 20000
    grid: tuple = (0.25, 0.5, 1.0)
    bias: float = 0.05
    z_max: float = 4.0


@dataclass(frozen=True)
class CriticalConfig:
    law: str = "rademacher"
    n: int = 10000
    n_paths: int = 20000
    grid: tuple = (0.5, 1.0)
    rel_tol: float = 0.10
    z_max: float = 3.0


@dataclass(frozen=True)
class BracketConfig:
    law: str = "rademacher"
    n: int = 100000
    n_paths: int = 100
    p_hat: float = 0.25
    p_check: float = 0.75
    p_mixed: float = 0.5
    tol_hat: float = 0.05
    tol_check: float = 0.05
    tol_mixed: float = 0.10
    cross_n: int = 10000
    cross_p: float = 0.5
    cross_times: tuple = (0.5, 1.0)
    cross_tol: float = 0.02


@dataclass(frozen=True)
class IsometryConfig:
    ps: tuple = (0.1, 0.3, 0.45)
    ns: tuple = (64, 512, 4096)
    law: str = "rademacher"
    n_paths: int = 100000
    z_max: float = 3.0


@dataclass(frozen=True)
class GrowthConfig:
    ps: tuple = (0.25, 0.5, 0.75)
    log2_ns: tuple = (10, 11, 12, 13, 14, 15, 16)
    law: str = "rademacher"
    n_paths: int = 10000
    slope_tol: float = 0.1


@dataclass(frozen=True)
class LLNConfig:
    n: int = 100000
    n_paths: int = 1000
    ballistic_p: float = 0.5
    ballistic_law: str = "discrete:0,2"
    squared_p: float = 0.5
    squared_law: str = "rademacher"
    reinforced_p: float = 0.25
    reinforced_law: str = "rademacher"
    rel_tol: float = 0.05
    z_max: float = 3.0


@dataclass(frozen=True)
class SuperdiffusiveConfig:
    p: float = 0.75
    law: str = "rademacher"
    log2_ns: tuple = (10, 11, 12, 13)
    n_paths: int = 20000
    oracle_levels: tuple = (2**14, 2**15)
    z_max: float = 3.0


@dataclass(frozen=True)
class TruncationConfig:
    configs: int = 100
    n: int = 1000
    tol: float = 1e-9
    origin_p: float = 0.5
    origin_n: int = 100000
    origin_paths: int = 100000
    origin_deltas: tuple = (0.01, 0.02, 0.04)
    origin_eps: float = 0.5
    origin_z: float = 2.0


@dataclass(frozen=True)
class LimitSamplerConfig:
    p: float = 0.3
    grid: tuple = (0.5, 1.0)
    cholesky_paths: int = 100000
    euler_paths: int = 10000
    euler_steps: int = 2**14
    z_max: float = 3.0
    discretisation: float = 0.02
    timechange_p: float = 0.25
    timechange_grid: tuple = (0.25, 0.5, 0.75, 1.0)
    timechange_paths: int = 100000
    self_z: float = 4.0


@dataclass(frozen=True)
class ConditionalConfig:
    prefixes: int = 10
    resamples: int = 100000
    n_min: int = 10
    n_max: int = 2000
    z_max: float = 3.0


@dataclass(frozen=True)
class DeterminismConfig:
    p: float = 0.3
    n: int = 512
    n_paths: int = 600
    threads: tuple = (1, 2, 4)
    batch_size: int = 64


def _law(law_text):
    return law_text if isinstance(law_text, StepLaw) else parse_law(law_text)


def run_enumeration(cfg, seed, threads=None):
    rep = enumeration_report(cfg.ps, cfg.n_max, cfg.tol)
    return TestReport("enumeration", dataclasses.asdict(cfg), seed, rep.checks)


def _endpoint(params, n, n_paths, seed, threads, name):
    ens = simulate_ensemble(params, n, n_paths, seed, indices=[n], threads=threads)
    return ens[name][:, 0]


def run_reinforced_variance(cfg, seed, threads=None):
    law = _law(cfg.law)
    params = ReinforcementParams(cfg.p, law, False)
    x = _endpoint(params, cfg.n, cfg.n_paths, seed, threads, "S_hat") / math.sqrt(cfg.n * law.sigma2)
    orc = exact_moments(cfg.p, law, cfg.n).m2_hat[cfg.n] / (cfg.n * law.sigma2)
    v, se = var_se(x)
    checks = [Check("mc-variance-vs-oracle", "var(S_hat_n/sqrt n)", orc, v, se, 0.0, "z", cfg.z_max),
              Check("oracle-vs-limit", "E[S_hat_n^2]/n", 1 / (1 - 2 * cfg.p), orc, 0.0, cfg.rel_tol, "rel")]
    return TestReport("reinforced-variance", dataclasses.asdict(cfg), seed, checks)


def run_counterbalanced_variance(cfg, seed, threads=None):
    law = _law(cfg.law)
    params = ReinforcementParams(cfg.p, law, False)
    root = math.sqrt(cfg.n * law.sigma2)
    x = _endpoint(params, cfg.n, cfg.n_paths, seed, threads, "S_check") / root
    orc = exact_moments(cfg.p, law, cfg.n).m2_check[cfg.n] / (cfg.n * law.sigma2)
    v, se = var_se(x)
    target = 1 / (1 + 2 * cfg.p)
    checks = [Check("mc-variance-vs-oracle", "var(S_check_n/sqrt n)", orc, v, se, 0.0, "z", cfg.z_max),
              Check("oracle-vs-limit", "E[S_check_n^2]/n", target, orc, 0.0, cfg.rel_tol, "rel")]
    lattice = 2.0 / root if law.kind == "rademacher" else None
    ks = marginal_gaussian_test(x, target, rel_tol=1.0, alpha=cfg.ks_alpha, lattice=lattice, seed=seed)
    checks.append(ks.checks[1])
    full = ReinforcementParams(1.0, _law("rademacher"), False)
    y = _endpoint(full, cfg.full_n, cfg.full_paths, seed + 1, threads, "S_check") / math.sqrt(cfg.full_n)
    vf = marginal_gaussian_test(y, 1.0 / 3.0, rel_tol=cfg.full_rel_tol, seed=seed)
    checks.append(dataclasses.replace(vf.checks[0], name="p=1:variance-ratio"))
    return TestReport("counterbalanced-variance", dataclasses.asdict(cfg), seed, checks)


def run_triplet(cfg, seed, threads=None):
    law = _law(cfg.law)
    params = ReinforcementParams(cfg.p, law, False)
    summary = scaled_summary(params, cfg.n, cfg.n_paths, seed, list(cfg.grid), "diffusive", threads)
    model = LimitCovarianceModel(cfg.p)
    rep = covariance_discrepancy(summary, model, cfg.bias, cfg.z_max, suite="triplet-diffusive",
                                 config=dataclasses.asdict(cfg), seed=seed)
    return rep


def critical_oracle(law, n, grid):
    """Exact covariance of the critically scaled path, from the moment recursion.

    For ``j <= k``, ``E[S_hat_j S_hat_k] = E[S_hat_j^2] a_j / a_k`` by the
    martingale property of ``a_k S_hat_k``.
    """
    idx = np.floor(float(n) ** np.asarray(grid) * (1 + 1e-12)).astype(np.int64)
    top = int(idx.max())
    m2 = exact_moments(0.5, law, top).m2_hat
    a = build_coefficients(0.5, top, counterbalanced=False).a_hat
    norm = np.sqrt(law.sigma2 * math.log(n) * idx.astype(float))
    out = np.empty((len(idx), len(idx)))
    for i, j in enumerate(idx):
        for k_, k in enumerate(idx):
            lo, hi = min(j, k), max(j, k)
            out[i, k_] = m2[lo] * a[lo - 1] / a[hi - 1] / (norm[i] * norm[k_])
    return out


def run_critical(cfg, seed, threads=None):
    law = _law(cfg.law)
    params = ReinforcementParams(0.5, law, False)
    grid = sorted(cfg.grid)
    s = scaled_summary(params, cfg.n, cfg.n_paths, seed, grid, "critical", threads)
    C, se = s.cov, s.cov_se
    orc = critical_oracle(law, cfg.n, grid)
    checks = []
    for a, (_, ta) in enumerate(s.labels):
        for b in range(a, len(s.labels)):
            tb = s.labels[b][1]
            checks.append(Check(f"oracle-cov[{ta:g},{tb:g}]", "covariance vs exact finite-n value", orc[a, b],
                                C[a, b], se[a, b], 0.0, "z", cfg.z_max))
            if ta == tb == max(grid):
                checks.append(Check(f"var[t={ta:g}]", "variance", ta, C[a, b], se[a, b], cfg.rel_tol, "rel"))
            elif ta != tb:
                checks.append(Check(f"cov[{ta:g},{tb:g}]", "covariance", min(ta, tb), C[a, b], se[a, b],
                                    cfg.rel_tol, "rel+z", cfg.z_max))
    return TestReport("critical", dataclasses.asdict(cfg), seed, checks)


def run_brackets(cfg, seed, threads=None):
    law = _law(cfg.law)
    s2 = law.sigma2
    checks = []
    cases = (("hat", cfg.p_hat, s2 / (1 - 2 * cfg.p_hat), cfg.tol_hat),
             ("check", cfg.p_check, s2 / (1 + 2 * cfg.p_check), cfg.tol_check),
             ("mixed", cfg.p_mixed, s2 * (1 - cfg.p_mixed) / (1 + cfg.p_mixed), cfg.tol_mixed))
    for j, (key, p, target, tol) in enumerate(cases):
        vals = bracket_medians(p, law, cfg.n, cfg.n_paths, seed + j, threads=threads)[key]
        med, se = median_boot(vals, seed + j)
        checks.append(Check(f"median-bracket-{key}[p={p:g}]", "median over paths", target, med, se, tol,
                            "rel"))
    p = cfg.cross_p
    coeffs = build_coefficients(p, cfg.cross_n)
    for t in cfg.cross_times:
        v = bracket_walk_cross(cfg.cross_n, t, p, s2, coeffs, "reinforced")
        checks.append(Check(f"cross-reinforced[t={t:g}]", "deterministic bracket", s2 * t ** (1 - p), v, 0.0,
                            cfg.cross_tol, "rel"))
        v = bracket_walk_cross(cfg.cross_n, t, p, s2, coeffs, "counterbalanced")
        checks.append(Check(f"cross-counterbalanced[t={t:g}]", "deterministic bracket",
                            s2 * (1 - p) * t ** (1 + p) / (1 + p), v, 0.0, cfg.cross_tol, "rel"))
    cfgd = dataclasses.asdict(cfg)
    cfgd["method"] = "medians with bootstrap SE (in-probability limits)"
    return TestReport("brackets", cfgd, seed, checks)


def run_isometry(cfg, seed, threads=None):
    law = _law(cfg.law)
    checks = []
    for j, p in enumerate(cfg.ps):
        checks += isometry_report(p, law, cfg.ns, cfg.n_paths, seed + j, cfg.z_max, threads).checks
    return TestReport("isometry", dataclasses.asdict(cfg), seed, checks)


def run_growth(cfg, seed, threads=None):
    law = _law(cfg.law)
    ns = [2**k for k in cfg.log2_ns]
    checks = []
    fits = {}
    for j, p in enumerate(cfg.ps):
        params = ReinforcementParams(p, law, False)
        _, means, _ = sup_second_moments(params, ns, cfg.n_paths, seed + j, threads)
        fit = growth_exponent_fit(zip(ns, means), critical=(p == 0.5))
        fits[p] = dataclasses.asdict(fit)
        if p == 0.5:
            checks.append(Check("p=0.5:log-corrected-fit-better", "rss(power) - rss(log)", 0.0,
                                fit.rss - fit.log_rss, 0.0, 0.0, "bool", flag=fit.log_preferred))
        else:
            target = 1.0 if p < 0.5 else 2 * p
            checks.append(Check(f"p={p:g}:slope", "least-squares exponent", target, fit.slope, 0.0,
                                cfg.slope_tol, "abs"))
    cfgd = dataclasses.asdict(cfg)
    cfgd["fits"] = {str(k): v for k, v in fits.items()}
    return TestReport("growth", cfgd, seed, checks)


def run_lln(cfg, seed, threads=None):
    checks = []
    runs = (("ballistic", cfg.ballistic_p, cfg.ballistic_law),
            ("squared", cfg.squared_p, cfg.squared_law),
            ("reinforced", cfg.reinforced_p, cfg.reinforced_law))
    for j, (tag, p, law_text) in enumerate(runs):
        rep = lln_report(ReinforcementParams(p, _law(law_text), True), cfg.n, cfg.n_paths, seed + j,
                         cfg.rel_tol, cfg.z_max, threads)
        checks += [dataclasses.replace(c, name=f"{tag}[p={p:g},{law_text}]:{c.name}") for c in rep.checks]
    cfgd = dataclasses.asdict(cfg)
    cfgd["method"] = "ensemble means at fixed n (a.s. limits via their L1 consequences)"
    return TestReport("lln", cfgd, seed, checks)


def run_superdiffusive(cfg, seed, threads=None):
    ns = [2**k for k in cfg.log2_ns]
    rep = superdiffusive_report(cfg.p, _law(cfg.law), ns, cfg.n_paths, seed, cfg.oracle_levels, cfg.z_max,
                                threads)
    cfgd = dataclasses.asdict(cfg)
    cfgd.update(rep.config)
    return TestReport("superdiffusive", cfgd, seed, rep.checks)


def _random_law(g):
    kind = g.integers(3)
    if kind == 0:
        return parse_law("rademacher")
    if kind == 1:
        k = int(g.integers(2, 6))
        v = np.round(g.normal(0, 2, size=k), 3)
        w = g.dirichlet(np.ones(k))
        w = w / w.sum()
        w[-1] = 1.0 - w[:-1].sum()
        v = v - float(np.dot(w, v))
        return StepLaw.discrete(v, w)
    return StepLaw.gaussian(0.0, float(g.uniform(0.3, 3.0)))


def run_truncation(cfg, seed, threads=None):
    g = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cfg.configs):
        law = _random_law(g)
        if not law.centred:
            law = StepLaw.discrete(np.asarray(law.values) - law.m, law.weights)
        p = float(g.uniform(0, 1))
        K = float(g.uniform(0.1, 3.0))
        s = int(g.integers(0, 2**63 - 1))
        total, low, high = simulate_decomposed(ReinforcementParams(p, law, False), K, cfg.n, s)
        for name in ("S", "S_hat", "S_check"):
            tot = getattr(total, name)
            err = np.max(np.abs(tot - getattr(low, name) - getattr(high, name)))
            worst = max(worst, err / max(1.0, float(np.max(np.abs(tot)))))
    checks = [Check(f"additivity[{cfg.configs} configs]", "max relative error", 0.0, worst, 0.0, cfg.tol,
                    "abs")]
    origin = origin_report(cfg.origin_p, parse_law("rademacher"), cfg.origin_n, cfg.origin_paths,
                           cfg.origin_deltas, cfg.origin_eps, seed + 1, cfg.origin_z, threads)
    checks += origin.checks
    cfgd = dataclasses.asdict(cfg)
    cfgd["origin_probabilities"] = origin.config["probabilities"]
    return TestReport("truncation", cfgd, seed, checks)


def _cov_compare(name, a, b, z_max, rel):
    Ca, Sa = a.cov, a.cov_se
    Cb, Sb = b.cov, b.cov_se
    out = []
    for i in range(len(a.labels)):
        for j in range(i, len(a.labels)):
            (ci, s), (cj, t) = a.labels[i], a.labels[j]
            se = math.hypot(Sa[i, j], Sb[i, j])
            rule = "rel+z" if rel > 0 else "z"
            out.append(Check(f"{name}[{ci}({s:g}),{cj}({t:g})]", "covariance difference", Ca[i, j], Cb[i, j],
                             se, rel, rule, z_max))
    return out


def _summary(ens):
    labels, rows = ensemble_rows(ens)
    return EnsembleSummary.empty(labels).update(rows)


def run_limit_samplers(cfg, seed, threads=None):
    model = LimitCovarianceModel(cfg.p)
    grid = TimeGrid(cfg.grid)
    chol = _summary(sample_limit_triplet(model, grid, cfg.cholesky_paths, seed, "cholesky"))
    eul = _summary(sample_limit_triplet(model, grid, cfg.euler_paths, seed + 1, "euler", cfg.euler_steps))
    checks = _cov_compare("cholesky-vs-euler", chol, eul, cfg.z_max, cfg.discretisation)
    self_rep = covariance_discrepancy(chol, model, 0.0, cfg.self_z)
    checks += [dataclasses.replace(c, name="self:" + c.name) for c in self_rep.checks]

    tmodel = LimitCovarianceModel(cfg.timechange_p)
    tgrid = TimeGrid(cfg.timechange_grid)
    tc = _summary(reinforced_bm_time_change(cfg.timechange_p, tgrid, cfg.timechange_paths, seed + 2))
    ch = _summary(sample_limit_triplet(tmodel, tgrid, cfg.timechange_paths, seed + 3, "cholesky",
                                       components=("B_hat",)))
    checks += _cov_compare("timechange-vs-cholesky", ch, tc, cfg.z_max, 0.0)
    C, _ = joint_covariance(tmodel, tgrid, ("B_hat",))
    k = len(tgrid) - 1
    checks.append(Check("timechange:var[t=1]", "variance", C[k, k], tc.cov[k, k], tc.cov_se[k, k], 0.0, "z",
                        cfg.z_max))
    return TestReport("limit-samplers", dataclasses.asdict(cfg), seed, checks)


def run_conditional(cfg, seed, threads=None):
    g = np.random.default_rng(seed)
    checks = []
    for j in range(cfg.prefixes):
        law = _random_law(g)
        p = float(g.uniform(0, 1))
        n = int(g.integers(cfg.n_min, cfg.n_max + 1))
        s = int(g.integers(0, 2**63 - 1))
        prefix = simulate_coupled(ReinforcementParams(p, law, True), n, s)
        rep = conditional_step_moments_test(prefix, cfg.resamples, seed + j, cfg.z_max)
        checks += [dataclasses.replace(c, name=f"prefix{j}[{law.kind},p={p:.3f},n={n}]:{c.name}")
                   for c in rep.checks]
    return TestReport("conditional-moments", dataclasses.asdict(cfg), seed, checks)


def run_determinism(cfg, seed, threads=None):
    from .walks import write_paths_csv

    params = ReinforcementParams(cfg.p, parse_law("rademacher"), True)
    idx = np.arange(0, cfg.n + 1, 7)
    ref = None
    checks = []
    for th in cfg.threads:
        ens = simulate_ensemble(params, cfg.n, cfg.n_paths, seed, idx, threads=th, batch_size=cfg.batch_size)
        buf = io.StringIO()
        write_paths_csv(buf, np.arange(cfg.n_paths), idx, ens, True)
        text = buf.getvalue()
        summ = scaled_summary(ReinforcementParams(cfg.p, params.law, False), cfg.n, cfg.n_paths, seed,
                              [0.5, 1.0], "diffusive", th)
        key = (text, summ.s2.tobytes(), summ.s4.tobytes())
        if ref is None:
            ref = key
        same = key == ref
        checks.append(Check(f"threads={th}:bit-identical", "paths and summaries", 1.0, float(same), 0.0, 0.0,
                            "bool", flag=same))
    model = LimitCovarianceModel(cfg.p)
    a = sample_limit_triplet(model, [0.5, 1.0], 200, seed, "cholesky").samples
    b = sample_limit_triplet(model, [0.5, 1.0], 200, seed, "cholesky").samples
    same = a.tobytes() == b.tobytes()
    checks.append(Check("limit-sampler:repeat", "bit-identical", 1.0, float(same), 0.0, 0.0, "bool", flag=same))
    lln_cfg = LLNConfig(n=2000, n_paths=200)
    r1 = run_lln(lln_cfg, seed, 1).to_json()
    r2 = run_lln(lln_cfg, seed, max(cfg.threads)).to_json()
    checks.append(Check("report:repeat", "bit-identical JSON", 1.0, float(r1 == r2), 0.0, 0.0, "bool",
                        flag=r1 == r2))
    return TestReport("determinism", dataclasses.asdict(cfg), seed, checks)


SUITES = {
    "enumeration": (EnumerationConfig, run_enumeration),
    "reinforced-variance": (ReinforcedVarianceConfig, run_reinforced_variance),
    "counterbalanced-variance": (CounterbalancedVarianceConfig, run_counterbalanced_variance),
    "triplet-diffusive": (TripletConfig, run_triplet),
    "critical": (CriticalConfig, run_critical),
    "brackets": (BracketConfig, run_brackets),
    "isometry": (IsometryConfig, run_isometry),
    "growth": (GrowthConfig, run_growth),
    "lln": (LLNConfig, run_lln),
    "superdiffusive": (SuperdiffusiveConfig, run_superdiffusive),
    "truncation": (TruncationConfig, run_truncation),
    "limit-samplers": (LimitSamplerConfig, run_limit_samplers),
    "conditional-moments": (ConditionalConfig, run_conditional),
    "determinism": (DeterminismConfig, run_determinism),
}


def suite_config(name, **overrides):
    """Default config of a suite with ``overrides`` applied; unknown keys raise ``KeyError``."""
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}")
    cls = SUITES[name][0]
    fields = {f.name for f in dataclasses.fields(cls)}
    for k in overrides:
        if k not in fields:
            raise KeyError(k)
    return cls(**overrides)


def run_suite(name, seed, threads=None, config=None, **overrides):
    if seed is None:
        raise ValueError("verification suites need an explicit seed")
    cfg = config if config is not None else suite_config(name, **overrides)
    return SUITES[name][1](cfg, int(seed), threads)

import math

import numpy as np
import pytest
from scipy.special import digamma

from conftest import ACCEPTANCE_SEED
from stepwalk.laws import discrete, gaussian, rademacher
from stepwalk.limits import LimitCovarianceModel, sample_limit_triplet
from stepwalk.moments import exact_moments
from stepwalk.stats import empirical_moments
from stepwalk.suites import critical_oracle
from stepwalk.verify import (conditional_step_moments_test, covariance_discrepancy, enumerate_rademacher,
                             enumeration_report, growth_exponent_fit, jitter_lattice, lln_report,
                             markov_rademacher, origin_control, origin_report, scaled_summary,
                             superdiffusive_report, sup_second_moments)
from stepwalk.walks import ReinforcementParams, simulate_coupled


def test_discrepancy_flags_a_wrong_model():
    ens = sample_limit_triplet(LimitCovarianceModel(0.1), [0.5, 1.0], 20_000, 1)
    report = covariance_discrepancy(empirical_moments([ens]), LimitCovarianceModel(0.4), bias=0.0, z_max=4.0)
    assert not report.passed


def test_growth_fit_recovers_exponents():
    ns = 2.0 ** np.arange(10, 17)
    assert growth_exponent_fit([(n, 3 * n**1.5) for n in ns]).slope == pytest.approx(1.5, abs=1e-12)
    fit = growth_exponent_fit([(n, n * math.log(n)) for n in ns], critical=True)
    assert fit.log_slope == pytest.approx(1.0, abs=1e-12) and fit.log_preferred
    with pytest.raises(ValueError):
        growth_exponent_fit([(n, n) for n in ns[:4]])


def test_sup_moments_bound_endpoint_moments():
    params = ReinforcementParams(0.25, rademacher(), False)
    ns, means, _ = sup_second_moments(params, [64, 256, 1024], 2000, 3)
    orc = exact_moments(0.25, rademacher(), 1024).m2_hat
    assert np.all(means >= orc[ns] * 0.9)
    assert np.all(np.diff(means) > 0)


@pytest.mark.parametrize("p,scale", [(0.25, lambda n: n**0.75), (0.5, lambda n: math.sqrt(n) * math.log(n)),
                                     (0.75, lambda n: n)])
def test_normalised_mean_squares_decrease(p, scale):
    params = ReinforcementParams(p, rademacher(), False)
    ns, means, ses = sup_second_moments(params, [2**12, 2**14, 2**16], 1000, 5)
    # the endpoint itself: mean square of S_hat_n over the normaliser squared, exact and by simulation
    orc = exact_moments(p, rademacher(), 2**16).m2_hat
    exact = [orc[n] / scale(n) ** 2 for n in ns]
    assert exact[0] > exact[1] > exact[2]
    sims = [m / scale(n) ** 2 for n, m in zip(ns, means)]
    assert sims[0] > sims[1] > sims[2]


def test_lln_report_small():
    report = lln_report(ReinforcementParams(0.5, discrete([0, 2])), 20_000, 200, 4)
    assert report.passed, report.summary_line()


def test_superdiffusive_needs_large_memory():
    with pytest.raises(ValueError):
        superdiffusive_report(0.5, rademacher(), [2**10, 2**11, 2**12], 100, 0)


def test_origin_control_edges():
    est = origin_control(0.5, rademacher(), 10_000, 500, [0.01, 0.04], 1000.0, 2)
    assert np.all(est.prob == 0)
    est = origin_control(0.5, rademacher(), 10_000, 500, [0.01, 0.04], 1e-6, 2)
    assert np.all(est.prob == 1)
    with pytest.raises(ValueError):
        origin_control(0.5, discrete([0, 2]), 100, 10, 0.1, 0.5, 0)
    with pytest.raises(ValueError):
        origin_control(0.5, rademacher(), 100, 10, 1.5, 0.5, 0)


def test_origin_probabilities_grow_with_delta():
    report = origin_report(0.5, rademacher(), 10_000, 5000, [0.05, 0.1, 0.2], 0.2, 3)
    probs = report.config["probabilities"]
    assert probs[0] <= probs[1] <= probs[2] and probs[2] > 0.1
    assert all(c.passed for c in report.checks if c.name.startswith("monotone"))


def test_conditional_moments_without_memory():
    prefix = simulate_coupled(ReinforcementParams(0.0, gaussian(0, 2)), 50, 1)
    report = conditional_step_moments_test(prefix, 20_000, 2)
    assert [c.target for c in report.checks] == [0.0, 0.0, 4.0]
    assert report.passed


def test_conditional_moments_rademacher_prefix():
    # a prefix whose reinforced walk sits at S_hat_n / n = 0.2
    for pid in range(500):
        prefix = simulate_coupled(ReinforcementParams(0.5, rademacher()), 50, 6, pid)
        if prefix.S_hat[-1] == 10:
            break
    report = conditional_step_moments_test(prefix, 100_000, 7)
    assert report.checks[0].target == pytest.approx(0.1)
    assert report.checks[2].target == pytest.approx(1.0)
    assert report.passed, report.summary_line()


def test_enumeration_agrees_with_markov_chain():
    for p in (0.25, 0.5, 0.75):
        for n in (1, 3, 5):
            a, b = enumerate_rademacher(p, n), markov_rademacher(p, n)
            keys = set(a) | set(b)
            assert max(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys) < 1e-12
            assert sum(a.values()) == pytest.approx(1.0, abs=1e-12)


def test_enumeration_report_small():
    report = enumeration_report(n_max=4)
    assert report.passed


def test_lattice_jitter_stays_in_cell():
    x = np.array([-2.0, 0.0, 2.0, 4.0])
    y = jitter_lattice(x, 2.0, 0)
    assert np.all(np.abs(y - x) <= 1.0)
    assert np.array_equal(y, jitter_lattice(x, 2.0, 0))


def test_critical_oracle_is_harmonic():
    orc = critical_oracle(rademacher(), 10_000, [0.5, 1.0])
    h100 = digamma(101) + np.euler_gamma
    assert orc[0, 0] == pytest.approx(h100 / math.log(1e4), rel=1e-12)
    assert orc[0, 0] > 0.5 * 1.1


def test_critical_ensemble_matches_finite_n_oracle():
    s = scaled_summary(ReinforcementParams(0.5, rademacher(), False), 10_000, 20_000, ACCEPTANCE_SEED,
                       [0.5, 1.0], "critical")
    orc = critical_oracle(rademacher(), 10_000, [0.5, 1.0])
    assert np.all(np.abs(s.cov - orc) <= 3 * s.cov_se)


def test_critical_covariance_targets_min_s_t():
    """Every entry of the critical covariance at (s, t) in {0.5, 1}^2 within 10% + 3 SE of min(s, t)."""
    s = scaled_summary(ReinforcementParams(0.5, rademacher(), False), 10_000, 20_000, ACCEPTANCE_SEED,
                       [0.5, 1.0], "critical")
    times = [t for _, t in s.labels]
    target = np.minimum.outer(times, times)
    assert np.all(np.abs(s.cov - target) <= 0.1 * target + 3 * s.cov_se), s.cov

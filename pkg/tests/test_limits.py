import io
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from stepwalk.limits import (COMPONENTS, LimitCovarianceModel, NumericalDegeneracyError, TimeGrid,
                             driver_correlation, joint_covariance, kernel_json, limit_covariance, psd_cholesky,
                             reinforced_bm_time_change, sample_limit_triplet, write_ensemble_csv)
from stepwalk.stats import empirical_moments
from stepwalk.verify import covariance_discrepancy

EXPONENT = {"B": lambda p: 0.0, "B_hat": lambda p: -p, "B_check": lambda p: p}


def represented_covariance(p, i, j, s, t):
    """Covariance from the stochastic-integral form, integrating the driver cross-covariance."""
    ei, ej = EXPONENT[i](p), EXPONENT[j](p)
    rho = driver_correlation(p)[COMPONENTS.index(i), COMPONENTS.index(j)]
    val, _ = integrate.quad(lambda u: u ** (ei + ej), 0.0, min(s, t), epsabs=0, epsrel=1e-12, limit=200)
    return s ** (-ei) * t ** (-ej) * rho * val


def test_kernel_examples():
    assert limit_covariance(LimitCovarianceModel(0.25), "B_hat", "B_hat", 1, 1) == pytest.approx(2.0)
    assert limit_covariance(LimitCovarianceModel(0.5), "B_check", "B_check", 1, 1) == pytest.approx(0.5)
    assert limit_covariance(LimitCovarianceModel(0.3), "B", "B_hat", 1, 1) == pytest.approx(1.0)
    assert limit_covariance(LimitCovarianceModel(0.3), "B_check", "B_hat", 0.0, 1) == 0.0
    assert limit_covariance(LimitCovarianceModel(0.3, sigma=2), "B", "B", 0.4, 0.9) == pytest.approx(1.6)
    with pytest.raises(ValueError):
        limit_covariance(LimitCovarianceModel(0.5), "B_hat", "B", 1, 1)
    with pytest.raises(ValueError):
        LimitCovarianceModel(1.0)


def test_kernels_vanish_at_the_origin():
    m = LimitCovarianceModel(0.4)
    for i in COMPONENTS:
        for j in COMPONENTS:
            assert abs(limit_covariance(m, i, j, 1e-12, 0.7)) < 1e-5


def test_kernel_matches_integral_representation():
    g = np.random.default_rng(0)
    for _ in range(200):
        p = g.uniform(0, 0.49)
        s, t = g.uniform(0.01, 3.0, size=2)
        i, j = g.choice(COMPONENTS, size=2)
        want = represented_covariance(p, i, j, s, t)
        assert limit_covariance(LimitCovarianceModel(p), i, j, s, t) == pytest.approx(want, rel=1e-8)


@given(st.floats(min_value=0.0, max_value=0.49), st.floats(min_value=0.01, max_value=5.0),
       st.floats(min_value=0.01, max_value=5.0))
def test_kernel_reproduces_displayed_one_sided_forms(p, s, t):
    m = LimitCovarianceModel(p)
    u = min(s, t)
    assert limit_covariance(m, "B", "B_check", s, t) == pytest.approx(t**-p * u ** (p + 1) * (1 - p) / (1 + p))
    assert limit_covariance(m, "B", "B_hat", s, t) == pytest.approx(t**p * u ** (1 - p))
    assert limit_covariance(m, "B_hat", "B_check", t, s) == pytest.approx(t**p * s**-p * u * (1 - p) / (1 + p))
    lo, hi = sorted((s, t))
    assert limit_covariance(m, "B_hat", "B_hat", lo, hi) == pytest.approx(hi**p * lo ** (1 - p) / (1 - 2 * p))
    assert limit_covariance(m, "B_check", "B_check", lo, hi) == pytest.approx(lo ** (1 + p) * hi**-p / (1 + 2 * p))


@given(st.floats(min_value=0.0, max_value=0.99), st.floats(min_value=1e-3, max_value=100.0))
def test_counterbalanced_variance_is_linear(p, t):
    assert limit_covariance(LimitCovarianceModel(p), "B_check", "B_check", t, t) == pytest.approx(t / (1 + 2 * p))


def test_driver_correlation_is_a_correlation():
    for p in np.linspace(0, 0.99, 12):
        R = driver_correlation(p)
        assert np.allclose(np.diag(R), 1) and np.allclose(R, R.T)
        assert np.linalg.eigvalsh(R).min() > -1e-12
    assert np.linalg.det(driver_correlation(0.5)) == pytest.approx(1 - 2 * 0.25 - 1 / 9 + 2 * 0.25 / 3)


@pytest.mark.parametrize("p", np.round(np.arange(0.05, 0.46, 0.05), 2))
def test_grid_covariance_factorises(p):
    grid = TimeGrid(np.linspace(1 / 16, 1, 16))
    C, labels = joint_covariance(LimitCovarianceModel(p), grid)
    assert len(labels) == 48 and labels[0] == ("B", 1 / 16) and labels[16][0] == "B_hat"
    L = psd_cholesky(C)
    assert np.allclose(L @ L.T, C, atol=1e-9)


def test_semidefinite_factor_and_degeneracy():
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    L = psd_cholesky(A)
    assert np.allclose(L @ L.T, A) and L[1, 1] == 0.0
    with pytest.raises(NumericalDegeneracyError) as err:
        psd_cholesky(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 2.0], [0.0, 2.0, 1.0]]))
    assert err.value.minor == 3


def test_sampler_variance_and_zero_time():
    ens = sample_limit_triplet(LimitCovarianceModel(0.25), [0.0, 1.0], 100_000, 1)
    assert np.all(ens.samples[:, :, 0] == 0)
    x = ens.component("B_hat")[:, 1]
    v = x.var(ddof=1)
    assert abs(v - 2.0) <= 3 * v * np.sqrt(2 / len(x))


def test_no_memory_components_coincide():
    for method, steps in (("cholesky", None), ("euler", 256)):
        ens = sample_limit_triplet(LimitCovarianceModel(0.0), [0.25, 0.5, 1.0], 50, 3, method, steps)
        assert np.allclose(ens.samples[:, 0], ens.samples[:, 1], atol=1e-12)
        assert np.allclose(ens.samples[:, 0], ens.samples[:, 2], atol=1e-12)


def test_sampler_is_deterministic_and_batch_free():
    m = LimitCovarianceModel(0.3)
    a = sample_limit_triplet(m, [0.5, 1.0], 5000, 9)
    b = sample_limit_triplet(m, [0.5, 1.0], 5000, 9)
    assert np.array_equal(a.samples, b.samples)
    assert np.array_equal(a.samples[:100], sample_limit_triplet(m, [0.5, 1.0], 100, 9).samples)


def test_sampler_errors():
    m = LimitCovarianceModel(0.3)
    with pytest.raises(ValueError):
        sample_limit_triplet(m, [1.0], 10, 0, "euler")
    with pytest.raises(ValueError):
        sample_limit_triplet(m, [1.0], 10, 0, "sobol")
    with pytest.raises(ValueError):
        TimeGrid([0.5, 0.25])
    with pytest.raises(ValueError):
        reinforced_bm_time_change(0.5, [1.0], 10, 0)


def test_time_change_examples():
    ens = reinforced_bm_time_change(0.25, [0.0, 0.25, 1.0], 100_000, 2)
    x = ens.samples[:, 0]
    assert np.all(x[:, 0] == 0)
    summary = empirical_moments([ens])
    i, j = summary.index(("B_hat", 0.25)), summary.index(("B_hat", 1.0))
    assert abs(summary.cov[j, j] - 2.0) <= 3 * summary.cov_se[j, j]
    assert abs(summary.cov[i, j] - 2 * 0.25**0.75) <= 3 * summary.cov_se[i, j]


def test_sampler_output_passes_its_own_discrepancy_check():
    m = LimitCovarianceModel(0.3)
    summary = empirical_moments([sample_limit_triplet(m, [0.25, 0.5, 1.0], 20_000, 4)])
    report = covariance_discrepancy(summary, m, bias=0.0, z_max=4.0, seed=4)
    assert report.passed


def test_dump_formats():
    m = LimitCovarianceModel(0.2)
    ens = sample_limit_triplet(m, [0.5, 1.0], 2, 0)
    buf = io.StringIO()
    write_ensemble_csv(buf, ens)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "path_id,component,t,value" and len(lines) == 1 + 2 * 3 * 2
    assert float(lines[1].split(",")[3]) == ens.samples[0, 0, 0]
    payload = json.loads(kernel_json(m, [0.5, 1.0]))
    C, _ = joint_covariance(m, [0.5, 1.0])
    assert np.array_equal(np.array(payload["covariance"]), C)

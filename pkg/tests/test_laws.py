import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, stats

from stepwalk import rng
from stepwalk.laws import discrete, gaussian, parse_law, rademacher, truncate_law


def test_rademacher_moments():
    law = rademacher()
    assert (law.m, law.sigma2, law.m2, law.bound) == (0.0, 1.0, 1.0, 1.0)


def test_discrete_validation():
    with pytest.raises(ValueError):
        discrete([1.0, 2.0], [0.5, 0.6])
    with pytest.raises(ValueError):
        discrete([1.0, 2.0], [1.5, -0.5])
    with pytest.raises(ValueError):
        gaussian(0.0, 0.0)


def test_parse_law_forms():
    assert parse_law("rademacher") == rademacher()
    assert parse_law("discrete:0,2") == discrete([0, 2])
    assert parse_law("discrete", values="-1,1", weights="0.25,0.75").m == 0.5
    assert parse_law("gaussian", mean=1, sd=2).sigma2 == 4.0
    with pytest.raises(ValueError):
        parse_law("cauchy")


def test_rademacher_truncation_at_two_leaves_no_tail():
    low, high = truncate_law(rademacher(), 2.0)
    assert low.sigma2 == 1.0 and low.bound == 1.0
    assert high.sigma2 == 0.0


def test_discrete_truncation_example():
    low, high = truncate_law(discrete([-2, -1, 1, 2]), 1.0)
    assert low.sigma2 == pytest.approx(0.5)
    assert high.sigma2 == pytest.approx(2.0)


def test_gaussian_truncation_at_ten_sd():
    low, high = truncate_law(gaussian(), 10.0)
    assert abs(low.sigma2 - 1.0) < 1e-8
    assert high.sigma2 < 1e-8
    with pytest.raises(ValueError):
        truncate_law(gaussian(), 0.0)


@pytest.mark.parametrize("mean,sd,K", [(0.0, 1.0, 0.5), (0.0, 2.0, 3.0), (0.7, 1.3, 1.1), (-1.0, 0.5, 2.0)])
def test_gaussian_split_matches_quadrature(mean, sd, K):
    pdf = stats.norm(mean, sd).pdf
    inner1 = integrate.quad(lambda x: x * pdf(x), -K, K)[0]
    inner2 = integrate.quad(lambda x: x * x * pdf(x), -K, K)[0]
    law = gaussian(mean, sd)
    low, high = truncate_law(law, K)
    assert low.sigma2 == pytest.approx(inner2 - inner1**2, rel=1e-8, abs=1e-12)
    outer1, outer2 = law.m - inner1, law.m2 - inner2
    assert high.sigma2 == pytest.approx(outer2 - outer1**2, rel=1e-8, abs=1e-12)


laws = st.sampled_from([rademacher(), discrete([-3, -1, 0, 2, 5], [0.1, 0.2, 0.3, 0.25, 0.15]),
                        gaussian(), gaussian(0.4, 1.7)])


@given(laws, st.floats(min_value=0.05, max_value=6.0), st.integers(min_value=0, max_value=1000))
def test_split_recombines_and_is_bounded(law, K, seed):
    low, high = truncate_law(law, K)
    bits = rng.bits_matrix(rng.derive_keys(seed, [0], rng.STEP), 400)
    x, lo, hi = law.sample_bits(bits), low.sample_bits(bits), high.sample_bits(bits)
    assert np.allclose(lo + hi, x - law.m, atol=1e-12)
    assert low.bound <= 2 * K + 1e-12
    assert np.all(np.abs(lo) <= low.bound + 1e-12)
    assert low.m == high.m == 0.0


def test_discrete_sampling_frequencies():
    law = discrete([0, 1, 5], [0.2, 0.5, 0.3])
    bits = rng.bits_matrix(rng.derive_keys(2, np.arange(50), rng.STEP), 2000)
    x = law.sample_bits(bits).ravel()
    counts = np.array([(x == v).sum() for v in (0, 1, 5)])
    chi2 = stats.chisquare(counts, np.array([0.2, 0.5, 0.3]) * x.size)
    assert chi2.pvalue > 1e-3

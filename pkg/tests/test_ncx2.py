import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from chernoff_outage import NCX2Params, cdf, exact_threshold, marcum_q, mean, pdf, sample, variance
from chernoff_outage.ncx2 import StandardizedParams
from chernoff_outage.verify import dkw_epsilon, sampling_check

# 40-digit Poisson-mixture evaluations (mpmath), frozen.
MP_CDF = [
    ((4, 1.0, 10.0, 5.0), 0.066488100179499759181),
    ((4, 1.0, 40.0, 1.0), 2.237287840001750757e-9),
    ((4, 1.0, 120.0, 40.0), 7.608193493871616121e-7),
    ((1, 0.5, 3.0, 1e-4), 0.00056188053908353038815),
    ((16, 2.0, 200.0, 50.0), 7.3936669343734588117e-10),
]

params_st = st.builds(
    NCX2Params,
    st.integers(1, 16),
    st.floats(0.1, 4.0),
    st.floats(0.0, 200.0),
)


class TestParams:
    @pytest.mark.parametrize("dof, sigma2, m2", [(0, 1.0, 0.0), (2.5, 1.0, 0.0), (2, 0.0, 1.0), (2, 1.0, -1.0)])
    def test_rejects_invalid(self, dof, sigma2, m2):
        with pytest.raises(ValueError):
            NCX2Params(dof, sigma2, m2)

    def test_standardized_round_trip(self):
        p = NCX2Params(6, 0.25, 3.0)
        s = p.standardized()
        assert s == StandardizedParams(6, 12.0, 0.25)
        assert s.to_params() == p


class TestMarcumQ:
    def test_central(self):
        assert marcum_q(1, 0.0, math.sqrt(2.0)) == pytest.approx(math.exp(-1.0), rel=1e-14)

    def test_zero_threshold(self):
        assert marcum_q(3, 2.0, 0.0) == 1.0

    @pytest.mark.parametrize(
        "order, a, b, expected",
        # Direct quadrature of the defining integral with exponentially scaled Bessel I.
        [(2, 1.0, 1.0, 0.9407902191465286), (1, 2.0, 3.0, 0.21436208816264946)],
    )
    def test_quadrature_oracle(self, order, a, b, expected):
        assert marcum_q(order, a, b) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("k, sigma2, m2, b", [(4, 1.0, 10.0, 2.0), (2, 0.5, 3.0, 0.7), (7, 2.0, 30.0, 4.0)])
    def test_complements_integrated_density(self, k, sigma2, m2, b):
        p = NCX2Params(k, sigma2, m2)
        x = b * b * sigma2
        lower, _ = integrate.quad(lambda t: pdf(p, t), 0.0, x, epsabs=1e-13, epsrel=1e-12, limit=200)
        q = marcum_q(k / 2, math.sqrt(m2 / sigma2), b)
        assert q + lower == pytest.approx(1.0, abs=1e-8)


class TestCdf:
    def test_exponential_case(self):
        assert cdf(NCX2Params(2, 1.0, 0.0), 2.0) == pytest.approx(1 - math.exp(-1), rel=1e-14)

    def test_zero_and_negative(self):
        p = NCX2Params(3, 1.0, 5.0)
        assert cdf(p, 0.0) == 0.0
        with pytest.raises(ValueError):
            cdf(p, -1.0)

    @pytest.mark.parametrize("args, expected", MP_CDF)
    def test_high_precision_oracle(self, args, expected):
        k, s2, m2, x = args
        assert cdf(NCX2Params(k, s2, m2), x) == pytest.approx(expected, rel=1e-12)

    def test_vectorized_matches_scalar(self):
        p = NCX2Params(5, 0.7, 12.0)
        xs = np.array([0.1, 1.0, 5.0, 20.0])
        np.testing.assert_allclose(cdf(p, xs), [cdf(p, float(x)) for x in xs], rtol=1e-15)

    def test_monte_carlo_point(self):
        p = NCX2Params(4, 1.0, 10.0)
        draws = sample(p, np.random.default_rng(11), size=10_000_000)
        assert abs(np.mean(draws <= 5.0) - cdf(p, 5.0)) <= dkw_epsilon(draws.size, 0.001)

    @settings(max_examples=30, deadline=None)
    @given(params_st)
    def test_monotone_on_grid(self, p):
        grid = np.linspace(0.0, 5 * p.mean() + 10, 1000)
        assert np.all(np.diff(cdf(p, grid)) >= 0.0)

    @settings(max_examples=30, deadline=None)
    @given(params_st, st.floats(0.01, 3.0))
    def test_limits_and_range(self, p, frac):
        v = cdf(p, frac * p.mean())
        assert 0.0 <= v <= 1.0
        assert cdf(p, 1e4 * p.mean() + 1e4) == pytest.approx(1.0, abs=1e-14)


class TestPdf:
    @pytest.mark.parametrize("x", [0.5, 3.0, 9.0])
    def test_finite_difference(self, x):
        p = NCX2Params(4, 1.0, 10.0)
        h = 1e-5
        fd = (cdf(p, x + h) - cdf(p, x - h)) / (2 * h)
        assert pdf(p, x) == pytest.approx(fd, rel=1e-7)

    def test_normalized(self):
        p = NCX2Params(3, 0.8, 6.0)
        total, _ = integrate.quad(lambda t: pdf(p, t), 0.0, np.inf, limit=200)
        assert total == pytest.approx(1.0, abs=1e-8)


class TestMoments:
    def test_central(self):
        p = NCX2Params(4, 1.0, 0.0)
        assert mean(p) == 4.0
        assert variance(p) == 8.0

    def test_noncentral(self):
        p = NCX2Params(3, 0.5, 2.0)
        assert mean(p) == pytest.approx(3.5)
        assert variance(p) == pytest.approx(2 * 3 * 0.25 + 4 * 0.5 * 2.0)

    def test_sample_moments(self):
        p = NCX2Params(6, 1.5, 20.0)
        draws = sample(p, np.random.default_rng(3), size=1_000_000)
        assert draws.mean() == pytest.approx(mean(p), rel=5e-3)
        assert draws.var() == pytest.approx(variance(p), rel=2e-2)


class TestSample:
    def test_deterministic(self):
        p = NCX2Params(4, 1.0, 10.0)
        a = sample(p, np.random.default_rng(5), size=1000)
        b = sample(p, np.random.default_rng(5), size=1000)
        np.testing.assert_array_equal(a, b)

    def test_scalar(self):
        assert np.ndim(sample(NCX2Params(2, 1.0, 1.0), np.random.default_rng(0))) == 0

    @pytest.mark.parametrize("sigma2", [0.3, 1.0, 3.0])
    def test_central_dkw(self, sigma2):
        rep = sampling_check(NCX2Params(4, sigma2, 0.0), 1_000_000, seed=17, alpha=0.001)
        assert rep.passed, rep

    def test_depends_on_means_only_through_energy(self):
        # Arbitrary mean vector with the same energy as the reference parameters.
        rng = np.random.default_rng(21)
        mu = np.array([1.0, -2.0, 0.5, 2.5])
        p = NCX2Params(mu.size, 1.0, float(mu @ mu))
        draws = ((rng.standard_normal((500_000, mu.size)) + mu) ** 2).sum(axis=1)
        band = dkw_epsilon(draws.size, 0.01)
        xs = np.sort(draws)[:: 500]
        ecdf = np.searchsorted(np.sort(draws), xs, side="right") / draws.size
        assert np.max(np.abs(ecdf - cdf(p, xs))) <= band


class TestExactThreshold:
    def test_exponential_case(self):
        # -2 log(1 - eps) for the two-dof central case.
        expected = -2 * math.log1p(-1e-6)
        assert exact_threshold(NCX2Params(2, 1.0, 0.0), 1e-6) == pytest.approx(expected, rel=1e-10)

    def test_high_precision_value(self):
        assert exact_threshold(NCX2Params(4, 1.0, 120.0), 1e-6) == pytest.approx(40.68916889921827, rel=1e-10)

    @pytest.mark.parametrize("eps", [1e-9, 1e-6, 1e-3, 0.3])
    def test_inverts_cdf(self, eps):
        p = NCX2Params(5, 0.4, 17.0)
        assert cdf(p, exact_threshold(p, eps)) == pytest.approx(eps, rel=1e-9)

    def test_explicit_tolerance(self):
        p = NCX2Params(4, 1.0, 10.0)
        coarse = exact_threshold(p, 1e-4, tol=1e-3)
        assert abs(coarse - exact_threshold(p, 1e-4)) <= 1e-3

    @pytest.mark.parametrize("eps", [0.0, 1.0, -0.1, 1.5])
    def test_rejects_epsilon(self, eps):
        with pytest.raises(ValueError, match="epsilon"):
            exact_threshold(NCX2Params(2, 1.0, 0.0), eps)

    def test_monotone_in_epsilon_and_energy(self):
        p = NCX2Params(4, 1.0, 40.0)
        by_eps = [exact_threshold(p, e) for e in (1e-8, 1e-6, 1e-4, 1e-2)]
        assert by_eps == sorted(by_eps)
        by_m2 = [exact_threshold(NCX2Params(4, 1.0, m), 1e-6) for m in (0.0, 20.0, 60.0, 120.0)]
        assert by_m2 == sorted(by_m2)

import math

import numpy as np
import pytest
from scipy import stats

from chernoff_outage import NCX2Params, cdf
from chernoff_outage.verify import bound_validity, dkw_epsilon, estimate, ks_upper_bound


def test_dkw_epsilon():
    assert dkw_epsilon(10**6, 0.01) == pytest.approx(math.sqrt(math.log(200) / 2e6))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_ks_bound_matches_exact_on_full_grid(seed):
    x = np.random.default_rng(seed).exponential(size=2000)
    exact = stats.kstest(x, stats.expon.cdf).statistic
    assert ks_upper_bound(x, stats.expon.cdf, grid_points=2000) == pytest.approx(exact, rel=1e-12)


@pytest.mark.parametrize("grid", [10, 100, 1000])
def test_ks_bound_is_conservative(grid):
    x = np.random.default_rng(7).normal(size=5000)
    exact = stats.kstest(x, stats.norm.cdf).statistic
    bound = ks_upper_bound(x, stats.norm.cdf, grid_points=grid)
    # Between evaluated order statistics the slack is one index spacing of ECDF mass.
    spacing = math.ceil((x.size - 1) / (grid - 1)) / x.size
    assert exact <= bound <= exact + spacing + 1e-12


def test_estimate_rejects_unknown():
    with pytest.raises(ValueError):
        estimate(NCX2Params(2, 1.0, 0.0), 1e-3, "bogus")


def test_bound_validity_rows():
    p = NCX2Params(4, 1.0, 40.0)
    rows = bound_validity(p, [1e-6, 1e-3], ["cher", "poly", "sankaran_z2"])
    flagged = {(r.method, r.epsilon): r.violation for r in rows}
    assert not flagged["cher", 1e-6] and not flagged["cher", 1e-3]
    assert flagged["poly", 1e-6]
    assert flagged["sankaran_z2", 1e-6]
    for r in rows:
        assert r.achieved_cdf == pytest.approx(cdf(p, r.value))

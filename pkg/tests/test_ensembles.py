import math

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given
from scipy.stats import binom, poisson

from zrlab import core
from zrlab import ensembles as en
from zrlab.errors import DegenerateError, DomainError, ExtendTableError

# frozen (mpmath): sup_k Pois(2.5)(5-k) / Pois(5)(5), and its k = 0 term
POISSON_RATIO_SUP = 1.46189927528441681256842111414
POISSON_RATIO_N0 = 0.380702936271983544939692998474
ONE_MINUS_INV_E = 0.632120558828557678404476229839


def _law(rate, alpha):
    return core.grand_canonical_site_law(rate, alpha)


def test_count_law_poisson():
    cl = en.total_count_law(_law(core.linear(), 1.0), 8)
    n = np.arange(cl.n_cut + 1)
    np.testing.assert_allclose(cl.pmf, poisson.pmf(n, 8), rtol=0, atol=1e-12)
    assert 1 - cl.tail_bound <= cl.pmf.sum() <= 1 + 1e-12


def test_count_law_single_volume():
    law = _law(core.staircase(), 2.0)
    cl = en.total_count_law(law, 1)
    np.testing.assert_allclose(cl.pmf[: law.k_cut + 1], law.pmf, rtol=1e-14)
    with pytest.raises(DomainError):
        en.total_count_law(law, 0)


@given(st.lists(st.floats(0.2, 5.0), min_size=3, max_size=12), st.floats(0.1, 3.0))
def test_count_law_mean(tail, alpha):
    rate = core.validate_rate_function([0.0] + tail + list(np.arange(len(tail) + 1, 400) * 1.0))
    law = _law(rate, alpha)
    cl = en.total_count_law(law, 8)
    assert cl.mean == pytest.approx(8 * law.mean_rho, rel=1e-10, abs=1e-10)


def test_llt_single_site():
    cl = en.total_count_law(_law(core.linear(), 1.0), 1)
    out = en.llt_errors(cl, 1)
    assert out["poisson_err"] == pytest.approx(abs(cl.pmf[1] - math.exp(-1)), abs=1e-15)


def test_llt_degenerate():
    cl = en.total_count_law(_law(core.linear(), 0.0), 4)
    with pytest.raises(DegenerateError):
        en.llt_errors(cl, 0)


def test_poisson_error_rate_staircase():
    rate = core.staircase()
    vals = []
    for V in (16, 32, 64, 128):
        a = core.invert_fugacity(rate, 2 / V)
        vals.append(en.llt_errors(en.total_count_law(_law(rate, a), V), 2)["poisson_err"] * V)
    assert en.band_ratio(vals) <= 3


def test_gaussian_error_rate_linear():
    vals = []
    for V in (16, 32, 64):
        law = _law(core.linear(), 2.0)
        out = en.llt_errors(en.total_count_law(law, V), 2 * V)
        vals.append(out["gaussian_err"] * math.sqrt(out["sigma2"] * V))
    assert en.band_ratio(vals) <= 3


def test_ensemble_ratio_poisson_closed_form():
    r = en.ensemble_ratio(core.linear(), 10, 5, 5)
    k = np.arange(6)
    np.testing.assert_allclose(r, poisson.pmf(5 - k, 2.5) / poisson.pmf(5, 5), rtol=1e-10)
    assert r[0] == pytest.approx(POISSON_RATIO_N0, rel=1e-10)
    assert en.ensemble_ratio_sup(core.linear(), 10, 0.5, 5) == pytest.approx(POISSON_RATIO_SUP,
                                                                              rel=1e-10)


def test_ensemble_ratio_domain():
    with pytest.raises(DomainError):
        en.ensemble_ratio_sup(core.linear(), 10, 1.0, 5)
    with pytest.raises(DomainError):
        en.ensemble_ratio_sup(core.linear(), 1, 0.5, 5)


def test_regimes():
    assert en.density_regime(5, 16) == "very_small"
    assert en.density_regime(16, 16) == "small"
    assert en.density_regime(17, 16) == "large"
    assert en.density_regime(17, 16, rho0=2) == "small"


def test_canonical_marginal_linear_is_binomial():
    m = en.canonical_site_marginal(core.linear(), 6, 9)
    np.testing.assert_allclose(m, binom.pmf(np.arange(10), 9, 1 / 6), rtol=1e-11)


def test_canonical_marginal_matches_enumeration():
    rate = core.staircase()
    s = core.enumerate_sector(4, 6)
    p = core.canonical_measure(s, rate).probs
    direct = np.bincount(s.configs[:, 2], p, minlength=7)
    np.testing.assert_allclose(en.canonical_site_marginal(rate, 4, 6), direct, rtol=1e-12)


def test_equivalence_gap():
    assert en.equivalence_gap(core.staircase(), 8, 0) == 0.0
    # linear: nu[c] = N / V and mu[c] = alpha = rho exactly
    assert en.equivalence_gap(core.linear(), 16, 16) <= 1e-10
    g = en.equivalence_gap(core.staircase(), 16, 16)
    assert 0 < g < 1
    with pytest.raises(DomainError):
        en.equivalence_gap(core.staircase(), 4, 4, site=4)


def test_herbst_poisson_closed_form():
    out = en.herbst_check(core.linear(), [1.0], [1.0, 0.0])
    assert out["violations"] == []
    # centered Poisson MGF exp(alpha (e^t - 1 - t)) vs exp(alpha t^2 e^t)
    assert out["max_log_excess"] == pytest.approx(0.0, abs=1e-14)  # attained at t = 0


def test_herbst_tail_certificate_required():
    with pytest.raises(ExtendTableError):
        en.herbst_check(core.staircase(n_max=200), [10.0], [2.0])


def test_mgf_suite_zero_violations():
    out = en.mgf_suite(core.linear())
    assert out["violations"] == 0
    assert out["herbst"]["max_log_excess"] <= 1e-12
    assert out["mgf_eta"]["fitted_C"] > 0


def test_sqrt_mgf_binomial():
    x = np.arange(11)
    out = en.sqrt_mgf_check(x, binom.pmf(x, 10, 0.3))
    assert out["violations"] == []
    assert [p["t"] for p in out["points"]] == [0.5, 1.0, 2.0]


def test_taylor_mgf():
    assert en.taylor_mgf_check(trials=300, seed=3)["violations"] == []


def test_identity_suite():
    out = en.identity_suite(core.staircase(), [0.0, 0.5, 2.0, 7.0])
    assert out["shift_identity_residual"] <= 1e-10
    assert out["inverse_rate_residual"] <= 1e-10
    assert out["skipped_alpha"] == [0.0]


def test_inverse_rate_identity_linear_oracle():
    law = _law(core.linear(), 1.0)
    lhs = law.pmf @ (1.0 / np.arange(1, law.k_cut + 2))
    assert lhs == pytest.approx(ONE_MINUS_INV_E, rel=1e-13)


def test_shift_identity_indicator():
    law = _law(core.linear(), 2.0)
    # f = 1(n = 3): mu[c f] = 3 p(3), alpha mu[T f] = 2 p(2); both equal 2 p(4) * 4 / 2
    assert 3 * law.pmf[3] == pytest.approx(2 * law.pmf[2], rel=1e-14)


def test_entropy_inequality_examples():
    p = np.full(4, 0.25)
    g = np.array([0.0, 1.0, -2.0, 0.5])
    s = en.entropy_inequality_check(p, np.full(4, 2.0), g, 1.0)
    assert s["slack"] >= 0
    f = np.array([1.0, 3.0, 0.0, 2.0])
    s = en.entropy_inequality_check(p, f, np.full(4, 5.0), 2.0)
    ent = float(p @ (f * np.log(np.where(f > 0, f, 1)))) - 1.5 * math.log(1.5)
    assert s["slack"] == pytest.approx(ent / 2.0, rel=1e-12)
    with pytest.raises(DomainError):
        en.entropy_inequality_check(p, f, g, 0.0)


def test_entropy_suite():
    out = en.entropy_suite(trials=1000)
    assert out["violations"] == []
    assert out["min_slack_entropy"] >= -1e-12 and out["min_slack_rothaus"] >= -1e-10


def test_band_ratio():
    assert en.band_ratio([1e-13, 0.0], atol=1e-9) == 1.0
    assert en.band_ratio([1.0, 2.0]) == 2.0
    assert en.band_ratio([1.0, 0.0]) == math.inf

import math

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given
from scipy.stats import binom

from zrlab import core
from zrlab import decomposition as dc
from zrlab import spectral as sp
from zrlab.errors import DisconnectedSupportError, DomainError


def _split(rate, L, N, half1=None):
    return dc.SplitSector(core.enumerate_sector(L, N), rate, half1)


def test_gamma_binomial_single_site():
    g = dc.gamma_distribution(core.linear(), 1, 3, 3)
    np.testing.assert_allclose(g.probs, binom.pmf(np.arange(4), 3, 0.25), rtol=1e-12)


def test_gamma_binomial_halves():
    g = dc.gamma_distribution(core.linear(), 2, 2, 6)
    np.testing.assert_allclose(g.probs, binom.pmf(np.arange(7), 6, 0.5), rtol=1e-12)


def test_gamma_empty_and_trivial():
    np.testing.assert_array_equal(dc.gamma_distribution(core.staircase(), 2, 3, 0).probs, [1.0])
    with pytest.raises(DomainError):
        dc.gamma_distribution(core.linear(), 0, 3, 2)


def test_gamma_matches_fibres():
    s = _split(core.staircase(), 5, 6)
    np.testing.assert_allclose(s.gamma_from_fibers(), s.gamma.probs, rtol=1e-12)
    assert s.factorization_residual() <= 1e-12


def test_birth_death_rates():
    ch = dc.birth_death_generator([0.25, 0.5, 0.25])
    np.testing.assert_allclose(ch.up, [1, 0.5, 0])
    np.testing.assert_allclose(ch.down, [0, 0.5, 1])
    uni = dc.birth_death_generator(np.ones(5))
    assert np.all(uni.up[:-1] == 1) and np.all(uni.down[1:] == 1)
    with pytest.raises(DisconnectedSupportError):
        dc.birth_death_generator([0.5, 0.0, 0.5])


@given(st.lists(st.floats(1e-6, 1.0), min_size=2, max_size=15))
def test_birth_death_reversible(w):
    ch = dc.birth_death_generator(np.array(w))
    assert ch.reversibility_residual() <= 1e-12
    phi = np.linspace(-1, 2, ch.size) ** 2
    lhs = ch.dirichlet(phi)
    rhs = -float((ch.pmf * phi) @ ch.apply(phi))
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-14)


def test_hardy_two_point_contains_scan():
    ch = dc.birth_death_generator([0.5, 0.5])
    hb = dc.hardy_lsi_bound(ch)
    assert hb.functional == pytest.approx(math.log(3), rel=1e-12)
    scan = max(sp.lsi_ratio(ch.generator, ch.measure, np.array([math.cos(t), math.sin(t)]))
               for t in np.linspace(0.01, 0.7, 2000))
    assert hb.lower <= scan <= hb.upper


def test_hardy_point_mass():
    hb = dc.hardy_lsi_bound(dc.birth_death_generator([1.0]))
    assert (hb.lower, hb.upper) == (0.0, 0.0)


def test_hardy_binomial_band():
    ups = []
    for N in (8, 16, 32, 64):
        ch = dc.birth_death_generator(binom.pmf(np.arange(N + 1), N, 0.5))
        ups.append(dc.hardy_lsi_bound(ch).upper / N)
    assert max(ups) / min(ups) <= 3


def test_conditional_expectation_properties():
    s = _split(core.linear(), 4, 4)
    rng = np.random.default_rng(2)
    f = rng.normal(size=s.sector.size)
    tower = sum(s.gamma.probs[n] * dc.conditional_expectation(f, s, n) for n in range(5))
    assert tower == pytest.approx(s.measure.expect(f), rel=1e-12)
    assert dc.conditional_expectation(np.full(s.sector.size, 2.5), s, 3) == pytest.approx(2.5)
    fib = s.n1.astype(float)
    for n in range(5):
        assert dc.conditional_expectation(fib, s, n) == pytest.approx(n, abs=1e-13)
    with pytest.raises(DomainError):
        dc.conditional_expectation(f, s, 7)


@pytest.mark.parametrize("family", [core.linear, core.staircase])
@pytest.mark.parametrize("L,N,half1", [(4, 4, None), (4, 5, None), (5, 4, [0]), (3, 6, [0, 2])])
def test_gradient_representations(family, L, N, half1):
    s = _split(family(), L, N, half1)
    fs = dc.random_positive_functions(s.sector.size, 5, seed=L * 10 + N)
    for f in fs:
        for n in range(1, N + 1):
            gr = dc.gradient_representation(f, s, n)
            tol = 1e-9 * max(abs(gr["direct"]), 1e-12)
            assert abs(gr["inward"] - gr["direct"]) <= tol
            assert abs(gr["outward"] - gr["direct"]) <= tol
            ab = dc.ab_split(f, s, n)
            assert abs(ab["A"] + ab["B"] - gr["direct"]) <= tol


def test_constant_function_gradients_vanish():
    s = _split(core.staircase(), 4, 4)
    f = np.full(s.sector.size, 1.7)
    for n in range(1, 5):
        gr = dc.gradient_representation(f, s, n)
        assert max(abs(v) for v in gr.values()) <= 1e-13
        ab = dc.ab_split(f, s, n)
        assert abs(ab["A"]) <= 1e-13 and abs(ab["B"]) <= 1e-13


def test_linear_rates_have_no_covariance_part():
    s = _split(core.linear(3.0), 4, 6)
    for f in dc.random_positive_functions(s.sector.size, 5, seed=1):
        for n in range(1, 7):
            ab = dc.ab_split(f, s, n)
            assert abs(ab["B"]) <= 1e-10 * abs(ab["A"]) + 1e-15


@pytest.mark.parametrize("family", [core.linear, core.staircase])
def test_exact_identities(family):
    s = _split(family(), 4, 5)
    res = dc.identity_residuals(s, dc.random_positive_functions(s.sector.size, 10, seed=5))
    for key in ("entropy_decomposition", "conditional_dirichlet", "gradient_inward",
                "gradient_outward", "ab_reconstruction", "factorization", "gamma_fibers"):
        assert res[key] <= 1e-10, key
    assert res["tensor_slack_min"] >= -1e-10
    assert dc.detailed_balance_residual(s.sector, family()) <= 1e-12


def test_gamma_ratio_constant_binomial_is_one():
    c, _ = dc.gamma_ratio_constant(dc.gamma_distribution(core.linear(), 3, 3, 9))
    assert c == pytest.approx(1.0, abs=1e-12)


def test_covariance_diagnostics_vanish_for_constants():
    sec = core.enumerate_sector(4, 3)
    out = dc.covariance_constants(sec, core.staircase(), np.full(sec.size, 2.0))
    assert out["C_L_c"] == pytest.approx(0.0, abs=1e-12)
    assert out["C_L_h"] == pytest.approx(0.0, abs=1e-12)


def test_gradient_bound_constant_does_not_grow_with_N():
    rate = core.staircase()
    vals = []
    for N in (4, 8, 16):
        rows = dc.diagnostics_scan([(4, N)], rate, n_functions=10, seed=0)
        vals.append(next(r["value"] for r in rows if r["quantity"] == "gradient_bound_C"))
    slope = np.polyfit(np.log([4, 8, 16]), np.log(vals), 1)[0]
    assert slope <= 0.1


def test_diagnostics_scan_table():
    rows = dc.diagnostics_scan([(4, 3), (2, 2)], core.linear(), n_functions=3)
    assert [(r["L"], r["N"]) for r in rows] == sorted((r["L"], r["N"]) for r in rows)
    assert all(np.isfinite(r["value"]) for r in rows)
    assert dc.diagnostics_scan([], core.linear()) == []


def test_gamma_chain_lsi_in_bracket():
    out = dc.gamma_chain_lsi(core.linear(), 1, 1, 8, restarts=4)
    assert out["hardy_lower"] <= out["estimate"] <= out["hardy_upper"]


def test_detailed_balance_single_site_is_vacuous():
    assert dc.detailed_balance_residual(core.enumerate_sector(1, 5), core.staircase()) == 0.0

"""Grand-canonical computations and inequality suites.

Count laws are convolutions of the truncated site law; canonical
single-site marginals and the canonical/grand-canonical density ratio are
computed from partition tables, so volumes in the hundreds need no sector
enumeration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln, logsumexp
from scipy.stats import binom, norm

from . import kernels
from .core import (
    RateFunction,
    SiteLaw,
    canonical_measure,
    enumerate_sector,
    grand_canonical_site_law,
    invert_fugacity,
    log_partition_table,
    log_site_weights,
    tail_ratio,
    _log_geometric,
)
from .decomposition import implied_AL
from .errors import DegenerateError, DomainError, ExtendTableError
from .spectral import _entropy

DEFAULT_RHO0 = 1.0


@dataclass(frozen=True, eq=False)
class CountLaw:
    """Law of the total particle number in ``volume`` independent sites, up to ``n_cut``."""

    site_law: SiteLaw
    volume: int
    log_pmf: np.ndarray
    n_cut: int
    tail_bound: float

    @property
    def pmf(self) -> np.ndarray:
        return np.exp(self.log_pmf)

    @property
    def mean(self) -> float:
        return float(self.pmf @ np.arange(self.n_cut + 1))


def total_count_law(site_law: SiteLaw, volume: int, n_cut: int | None = None) -> CountLaw:
    """``volume``-fold convolution of the site law by repeated doubling, in log-space.

    ``tail_bound`` bounds the absolute error of every entry and the mass
    beyond ``n_cut``: the missing mass above the cut plus ``2 V tau`` for the
    site-law tail ``tau``.
    """
    if volume < 1:
        raise DomainError("volume must be >= 1")
    V = int(volume)
    full = V * site_law.k_cut
    if n_cut is None:
        m, s = site_law.mean_rho * V, math.sqrt(site_law.variance_sigma2 * V)
        n_cut = min(full, int(math.ceil(m + 40 * s + 60)))
    n_cut = int(n_cut)
    out = np.full(n_cut + 1, -np.inf)
    out[0] = 0.0
    base = np.full(n_cut + 1, -np.inf)
    k = min(site_law.k_cut, n_cut)
    base[: k + 1] = site_law.log_pmf[: k + 1]
    v = V
    while v > 0:
        if v & 1:
            out = kernels.log_convolve(out, base, n_cut + 1)
        v >>= 1
        if v:
            base = kernels.log_convolve(base, base, n_cut + 1)
    mass = float(np.exp(logsumexp(out)))
    tau = site_law.tail_bound
    tail = max(0.0, 1.0 - mass) + 2.0 * V * tau
    if n_cut < full and tail > 1e-6:
        raise ExtendTableError(f"count law cut {n_cut} leaves mass {1 - mass:g}")
    return CountLaw(site_law, V, out, n_cut, tail)


def poisson_pmf(lam: float, n) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    if lam == 0:
        return (n == 0).astype(float)
    return np.exp(n * math.log(lam) - lam - gammaln(n + 1))


def llt_errors(count_law: CountLaw, N: int) -> dict:
    """Poisson and Gaussian local-limit errors of the count law.

    ``poisson_err = max_{0 < n <= N} |p(n) - N^n e^{-N} / n!|`` and
    ``gaussian_err = max_n |sqrt(s2 V) p(n) - phi((n - rho V) / sqrt(s2 V))|``.
    """
    site = count_law.site_law
    V = count_law.volume
    s2 = site.variance_sigma2
    if s2 <= 0:
        raise DegenerateError("zero site variance")
    p = count_law.pmf
    n = np.arange(1, min(N, count_law.n_cut) + 1)
    pois = float(np.max(np.abs(p[n] - poisson_pmf(N, n)))) if n.size else 0.0
    sd = math.sqrt(s2 * V)
    allk = np.arange(count_law.n_cut + 1)
    gauss = float(np.max(np.abs(sd * p - norm.pdf((allk - site.mean_rho * V) / sd))))
    return {"poisson_err": pois, "gaussian_err": gauss, "sigma2": s2}


# ---------------------------------------------------------------------------
# canonical versus grand canonical


def _log_Z_alpha(rate, alpha):
    return grand_canonical_site_law(rate, alpha).log_Z


def ensemble_ratio(rate: RateFunction, volume: int, sub_volume: int, N: int) -> np.ndarray:
    """``p_{V - V'}(N - n) / p_V(N)`` at ``rho = N / V`` for ``n = 0..N``.

    With ``p_V(m) = alpha^m Z_V^m / Z(alpha)^V`` the ratio is
    ``alpha^{-n} Z_{V-V'}^{N-n} Z(alpha)^{V'} / Z_V^N``.
    """
    V, Vp = int(volume), int(sub_volume)
    if not 1 <= Vp < V:
        raise DomainError("need 1 <= |Lambda'| < |Lambda|")
    if N == 0:
        return np.ones(1)
    alpha = invert_fugacity(rate, N / V)
    logZa = _log_Z_alpha(rate, alpha)
    zrest = log_partition_table(rate, V - Vp, N)
    zall = log_partition_table(rate, V, N)
    n = np.arange(N + 1)
    lr = -n * math.log(alpha) + zrest[N - n] + Vp * logZa - zall[N]
    if not np.all(np.isfinite(lr)):
        raise DegenerateError("p_V(N) vanishes")
    return np.exp(lr)


def ensemble_ratio_sup(rate: RateFunction, volume: int, sub_fraction: float, N: int) -> float:
    """``sup_n p_{V - V'}(N - n) / p_V(N)`` with ``|Lambda'| = floor(delta0 |Lambda|)``."""
    if not 0 < sub_fraction < 1:
        raise DomainError("sub_fraction must lie in (0, 1)")
    Vp = int(math.floor(sub_fraction * volume))
    if Vp < 1:
        raise DomainError("|Lambda'| = floor(delta0 |Lambda|) must be >= 1")
    return float(np.max(ensemble_ratio(rate, volume, Vp, N)))


def density_regime(N: int, volume: int, rho0: float = DEFAULT_RHO0, very_small: int = 5) -> str:
    if N <= very_small:
        return "very_small"
    if N <= rho0 * volume:
        return "small"
    return "large"


def ensemble_ratio_table(rate: RateFunction, volumes, sub_fraction: float = 0.5,
                         max_density: float = 4.0, rho0: float = DEFAULT_RHO0) -> list[dict]:
    """Sup-ratio for every volume and ``N = 1..max_density * V`` with its regime."""
    rows = []
    for V in volumes:
        for N in range(1, int(max_density * V) + 1):
            rows.append(dict(volume=int(V), N=N, regime=density_regime(N, V, rho0),
                             sup_ratio=ensemble_ratio_sup(rate, V, sub_fraction, N)))
    return rows


def canonical_site_marginal(rate: RateFunction, volume: int, N: int) -> np.ndarray:
    """``nu_Lambda^N[eta_x = k] ∝ (1 / c(k)!) Z_{V-1}^{N-k}`` for ``k = 0..N``."""
    if volume < 1:
        raise DomainError("volume must be >= 1")
    if volume == 1:
        out = np.zeros(N + 1)
        out[N] = 1.0
        return out
    z = log_partition_table(rate, volume - 1, N)
    k = np.arange(N + 1)
    lw = -rate.log_factorials[: N + 1] + z[N - k]
    return np.exp(lw - logsumexp(lw))


def equivalence_gap(rate: RateFunction, volume: int, N: int, site: int = 0) -> float:
    """``|nu_Lambda^N[c(eta_x)] - mu_{N/V}[c(eta_x)]|`` by the marginal route.

    Sites of a sector are exchangeable under the canonical measure, so
    ``site`` only has to lie in the volume.
    """
    if not 0 <= site < volume:
        raise DomainError(f"site {site} outside the volume")
    if N == 0:
        return 0.0
    marg = canonical_site_marginal(rate, volume, N)
    canon = float(marg @ rate.values[: N + 1])
    law = grand_canonical_site_law(rate, invert_fugacity(rate, N / volume))
    grand = law.expect(rate.values)
    return abs(canon - grand)


# ---------------------------------------------------------------------------
# inequality suites


def _log_mgf_upper(rate: RateFunction, alpha: float, values, t: float, step: float,
                   max_tail: float = 1e-10):
    """Upper bound on ``log sum_k w_k e^{t v_k} - log Z`` (truncated ``Z`` in the denominator).

    ``step`` bounds ``v_{k+1} - v_k`` beyond the table.  For ``t <= 0`` and
    ``v >= 0`` the factor ``e^{t v}`` is at most 1, so only the weights'
    envelope is needed.  Returns ``(log upper, relative size of the tail)``;
    a tail above ``max_tail`` of the body raises :class:`ExtendTableError`.
    """
    lw = log_site_weights(rate, alpha)
    K = rate.n_max
    v = np.asarray(values, dtype=float)[: K + 1]
    logZ = float(logsumexp(lw))
    body = float(logsumexp(lw + t * v))
    tp = max(t, 0.0)
    r = tail_ratio(rate, alpha, K, math.exp(tp * step))
    tail = _log_geometric(lw[K] + tp * v[K], r)
    rel = math.exp(tail - body) if tail > -math.inf else 0.0
    if rel > max_tail:
        raise ExtendTableError(
            f"MGF tail {rel:.3g} of the value at alpha={alpha:g}, t={t:g}; tabulate more rates")
    return float(np.logaddexp(body, tail)) - logZ, rel


def herbst_check(rate: RateFunction, rho_grid, t_grid) -> dict:
    """``mu_rho[e^{t (c - alpha)}] <= exp(alpha a1 t^2 e^{a1 |t|})`` with certified tails."""
    a1 = rate.lipschitz_a1
    worst, witness, violations, max_tail = -math.inf, None, [], 0.0
    for rho in rho_grid:
        alpha = invert_fugacity(rate, rho)
        for t in t_grid:
            lm, tail = _log_mgf_upper(rate, alpha, rate.values, t, a1)
            lm -= t * alpha
            bound = alpha * a1 * t * t * math.exp(a1 * abs(t))
            max_tail = max(max_tail, tail)
            excess = lm - bound
            if excess > worst:
                worst, witness = excess, (float(rho), float(t))
            if excess > 1e-12 * max(1.0, abs(bound)):
                violations.append(dict(rho=float(rho), t=float(t), log_mgf=lm, log_bound=bound))
    return {"check": "herbst", "violations": violations, "max_log_excess": worst,
            "witness": witness, "max_relative_tail": max_tail}


def fitted_mgf_constant(rate: RateFunction, rho_grid, t_grid) -> dict:
    """Smallest ``C`` with ``mu_rho[e^{t eta}] <= exp(C t rho e^{C t})`` on the grid (``t > 0``)."""
    best, witness = 0.0, None
    for rho in rho_grid:
        alpha = invert_fugacity(rate, rho)
        for t in t_grid:
            if t <= 0:
                continue
            lm, _ = _log_mgf_upper(rate, alpha, np.arange(rate.n_max + 1), t, 1.0)

            def gap(C):
                return C * t * rho * math.exp(C * t) - lm
            lo = 0.0
            hi = 1.0
            while gap(hi) < 0:
                hi *= 2
            C = brentq(gap, lo, hi, xtol=1e-14, rtol=1e-12)
            if C > best:
                best, witness = C, (float(rho), float(t))
    return {"check": "mgf_eta", "fitted_C": best, "witness": witness, "violations": []}


def taylor_mgf_check(trials: int = 1000, support: int = 8, seed: int = 0) -> dict:
    """``E e^X <= exp(E X + E[X^2 e^{|X|}] / 2)`` on random finitely supported ``X``."""
    rng = np.random.default_rng(seed)
    worst, witness, violations = -math.inf, None, []
    for i in range(trials):
        x = rng.normal(0.0, rng.uniform(0.1, 3.0), support)
        p = rng.dirichlet(np.ones(support))
        lhs = float(logsumexp(x, b=p))
        rhs = float(p @ x + 0.5 * p @ (x * x * np.exp(np.abs(x))))
        if lhs - rhs > worst:
            worst, witness = lhs - rhs, i
        if lhs - rhs > 1e-12 * max(1.0, abs(rhs)):
            violations.append(dict(trial=i, x=x.tolist(), p=p.tolist()))
    return {"check": "taylor_mgf", "violations": violations, "max_log_excess": worst,
            "witness": witness}


def sqrt_mgf_check(values, probs, t_points=(0.5, 1.0, 2.0)) -> dict:
    """Square-root MGF bound for ``X >= 0`` with ``g`` measured as the smallest admissible function.

    ``g(t) = log E e^{tX} / (t E X)`` (``g(0) = 1``) satisfies the hypothesis
    with equality, so the conclusion is tested at its tightest.
    """
    x = np.asarray(values, dtype=float)
    p = np.asarray(probs, dtype=float)
    if np.any(x < 0):
        raise DomainError("X must be non-negative")
    ex = float(p @ x)

    def g(t):
        if t == 0:
            return 1.0
        return float(logsumexp(t * x, b=p)) / (t * ex)

    rows, violations = [], []
    for t in t_points:
        lhs = float(p @ np.exp(t * np.sqrt(x)))
        rhs = math.exp(t * math.sqrt(2 * g(2 * t) + g(t)) * math.sqrt(ex)) + math.exp(t)
        rows.append(dict(t=float(t), lhs=lhs, rhs=rhs))
        if lhs > rhs * (1 + 1e-12):
            violations.append(rows[-1])
    return {"check": "sqrt_mgf", "violations": violations, "points": rows}


def entropy_inequality_check(probs, f, g, t: float) -> dict:
    """Slack of ``cov(f, g) <= nu[f]/t log nu[e^{t(g - nu g)}] + Ent(f)/t`` and its symmetric form."""
    if t <= 0:
        raise DomainError("t must be positive")
    p = np.asarray(probs, dtype=float)
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if np.any(f < 0):
        raise DomainError("f must be non-negative")
    g0 = g - p @ g
    mf = float(p @ f)
    cov = float(p @ (f * g0))
    ent = _entropy(p, f)
    lp = float(logsumexp(t * g0, b=p))
    lm = float(logsumexp(-t * g0, b=p))
    one = mf / t * lp + ent / t - cov
    two = mf / t * max(lp, lm) + ent / t - abs(cov)
    return {"slack": one, "slack_symmetric": two}


def rothaus_slack(probs, f) -> float:
    """``Ent(fbar) + 2 Var(sqrt f) - Ent(f)`` with ``fbar = (sqrt f - nu[sqrt f])^2``."""
    p = np.asarray(probs, dtype=float)
    f = np.asarray(f, dtype=float)
    s = np.sqrt(f)
    m = p @ s
    fbar = (s - m) ** 2
    return _entropy(p, fbar) + 2.0 * float(p @ (s - m) ** 2) - _entropy(p, f)


def entropy_suite(trials: int = 1000, size: int = 20, t_points=(0.1, 1.0, 10.0), seed: int = 0) -> dict:
    """Random ``f >= 0``, ``g`` and ``nu`` on ``size`` points."""
    rng = np.random.default_rng(seed)
    min_one, min_two, min_roth = math.inf, math.inf, math.inf
    violations = []
    for i in range(trials):
        p = rng.dirichlet(np.ones(size))
        f = np.exp(rng.normal(0, 1.5, size))
        if i % 10 == 0:
            f[rng.integers(size)] = 0.0
        g = rng.normal(0, 2.0, size)
        for t in t_points:
            s = entropy_inequality_check(p, f, g, t)
            min_one, min_two = min(min_one, s["slack"]), min(min_two, s["slack_symmetric"])
            if min(s["slack"], s["slack_symmetric"]) < -1e-12:
                violations.append(dict(check="entropy_inequality", trial=i, t=t))
        r = rothaus_slack(p, f)
        min_roth = min(min_roth, r)
        if r < -1e-10:
            violations.append(dict(check="rothaus", trial=i))
    return {"check": "entropy_inequality", "violations": violations, "min_slack_entropy": min_one,
            "min_slack_symmetric": min_two, "min_slack_rothaus": min_roth}


def mgf_suite(rate: RateFunction, rho_grid=None, t_grid=None, sector_grid=None,
              seed: int = 0) -> dict:
    """All moment-generating-function checks; fitted constants are reported, not asserted."""
    if rho_grid is None:
        rho_grid = np.geomspace(0.1, 10.0, 12)
    if t_grid is None:
        t_grid = np.linspace(-2.0, 2.0, 41)
    if sector_grid is None:
        sector_grid = [(L, N) for L in (2, 3, 4) for N in (1, 2, 4, 8)]
    herbst = herbst_check(rate, rho_grid, t_grid)
    mgf = fitted_mgf_constant(rate, rho_grid, t_grid)
    taylor = taylor_mgf_check(seed=seed)
    xs = np.arange(11)
    sq = sqrt_mgf_check(xs, binom.pmf(xs, 10, 0.3))
    al = []
    for L, N in sector_grid:
        s = enumerate_sector(L, N)
        v = implied_AL(s, rate, measure=canonical_measure(s, rate))
        al.append(dict(L=L, N=N, **v))
    violations = herbst["violations"] + taylor["violations"] + sq["violations"]
    return {"rate": rate.name, "herbst": herbst, "mgf_eta": mgf, "taylor": taylor,
            "sqrt_mgf": sq, "implied_A_L": al, "violations": len(violations)}


def identity_suite(rate: RateFunction, alpha_grid=None) -> dict:
    """Shift identity on indicator test functions and the inverse-rate identity.

    Also reports ``Var(h) rho`` per fugacity.  ``alpha = 0`` is skipped for the
    inverse-rate identity (removable singularity).
    """
    if alpha_grid is None:
        alpha_grid = np.geomspace(0.05, 20.0, 15)
    shift, inv, skipped, var_h = 0.0, 0.0, [], []
    for alpha in alpha_grid:
        law = grand_canonical_site_law(rate, alpha)
        lp = law.log_pmf
        K = law.k_cut
        if alpha > 0:
            # f = 1(n = j): mu[c f] = c(j) p(j), alpha mu[T f] = alpha p(j - 1)
            j = np.arange(1, K + 1)
            lhs = np.log(rate.values[j]) + lp[j]
            rhs = math.log(alpha) + lp[j - 1]
            shift = max(shift, float(np.max(np.abs(np.expm1(lhs - rhs)))))
            # f = 1: mu[c] = alpha
            shift = max(shift, abs(law.expect(rate.values) - alpha) / alpha)
        if alpha == 0:
            skipped.append(float(alpha))
        else:
            rate.require(K + 1)
            lhs = float(law.pmf @ (1.0 / rate.values[1: K + 2]))
            rhs = -math.expm1(-law.log_Z) / alpha
            inv = max(inv, abs(lhs - rhs) / abs(rhs))
        h = rate.h[: K + 1]
        var_h.append(dict(alpha=float(alpha), rho=law.mean_rho,
                          var_h_times_rho=float(law.pmf @ (h - law.pmf @ h) ** 2) * law.mean_rho))
    return {"rate": rate.name, "shift_identity_residual": shift,
            "inverse_rate_residual": inv, "skipped_alpha": skipped, "var_h": var_h}


def band_ratio(values, atol: float = 0.0) -> float:
    """``max / min`` of positive values; values below ``atol`` count as exact zeros.

    An identically-zero series (up to ``atol``) has ratio 1.
    """
    v = np.abs(np.asarray(values, dtype=float))
    if np.all(v <= atol):
        return 1.0
    if np.any(v <= atol):
        return math.inf
    return float(v.max() / v.min())

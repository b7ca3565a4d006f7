"""Two-block decomposition of a sector.

A sector on ``Lambda = Lambda_1 + Lambda_2`` is split by the number
``n`` of particles in the first block.  ``gamma(n)`` is the law of that
number, the fibres ``{eta_bar_1 = n}`` carry the product of the two block
canonical measures, and the discrete gradient ``nu[f | n] - nu[f | n - 1]``
has an exact representation in terms of particle moves between blocks.

Normalisations used for the gradient representations (self-certifying,
since both equal the direct difference): moving a particle from
``Lambda_2`` into ``Lambda_1`` gives the prefactor
``gamma(n-1) / (gamma(n) n |Lambda_2|)``, the reverse move
``-gamma(n) / (gamma(n-1) (N-n+1) |Lambda_1|)``.  For equal blocks both
sizes are the block length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from . import kernels
from .core import (
    DiscreteMeasure,
    RateFunction,
    Sector,
    canonical_measure,
    enumerate_sector,
    log_partition_table,
)
from .errors import DegenerateError, DisconnectedSupportError, DomainError, ShapeError
from .spectral import (
    SparseGenerator,
    _entropy,
    _phi,
    assemble_generator,
    birth_death_generator_matrix,
    lsi_constant,
)

HARDY_FACTOR = 20.0


def gamma_distribution(rate: RateFunction, sites1: int, sites2: int, N: int) -> DiscreteMeasure:
    """Law of the particle number in the first block, ``gamma(n) ∝ Z_1^n Z_2^{N-n}``."""
    if sites1 < 1 or sites2 < 1:
        raise DomainError("both blocks must be non-empty")
    if N < 0:
        raise DomainError("particle number must be non-negative")
    z1 = log_partition_table(rate, sites1, N)
    z2 = log_partition_table(rate, sites2, N)
    return DiscreteMeasure.from_log_weights(z1 + z2[::-1])


# ---------------------------------------------------------------------------
# birth and death chain on {0..N}


@dataclass(frozen=True, eq=False)
class BirthDeathChain:
    """Metropolis chain reversible for ``gamma`` on its support ``start..start+len-1``.

    ``up[k]`` and ``down[k]`` are the rates out of ``start + k``.
    """

    pmf: np.ndarray
    log_pmf: np.ndarray
    up: np.ndarray
    down: np.ndarray
    start: int

    @property
    def size(self) -> int:
        return self.pmf.shape[0]

    @cached_property
    def generator(self) -> SparseGenerator:
        return birth_death_generator_matrix(self.up, self.down)

    @cached_property
    def measure(self) -> DiscreteMeasure:
        return DiscreteMeasure.from_log_weights(self.log_pmf)

    @cached_property
    def conductances(self) -> np.ndarray:
        """``gamma(k) ∧ gamma(k-1)`` for the bonds ``(k-1, k)``."""
        return np.minimum(self.pmf[1:], self.pmf[:-1])

    def dirichlet(self, phi) -> float:
        phi = np.asarray(phi, dtype=float)
        if phi.shape[0] != self.size:
            raise ShapeError("function length differs from the chain support")
        return float(self.conductances @ np.diff(phi) ** 2)

    def apply(self, phi):
        """``A phi`` as in the Metropolis generator."""
        phi = np.asarray(phi, dtype=float)
        out = np.zeros_like(phi)
        out[:-1] += self.up[:-1] * (phi[1:] - phi[:-1])
        out[1:] += self.down[1:] * (phi[:-1] - phi[1:])
        return out

    def reversibility_residual(self) -> float:
        if self.size < 2:
            return 0.0
        a = self.pmf[:-1] * self.up[:-1]
        b = self.pmf[1:] * self.down[1:]
        return float(np.max(np.abs(a - b) / np.maximum(a, b)))


def birth_death_generator(gamma) -> BirthDeathChain:
    """Metropolis rates ``up(n) = gamma(n+1)/gamma(n) ∧ 1``, ``down(n) = gamma(n-1)/gamma(n) ∧ 1``."""
    if isinstance(gamma, DiscreteMeasure):
        lg = gamma.log_probs
    else:
        g = np.asarray(gamma, dtype=float)
        if np.any(g < 0) or g.sum() <= 0:
            raise DomainError("gamma must be a non-negative, non-zero vector")
        with np.errstate(divide="ignore"):
            lg = np.log(g) - math.log(g.sum())
    support = np.flatnonzero(np.isfinite(lg))
    start, stop = int(support[0]), int(support[-1]) + 1
    if support.shape[0] != stop - start:
        raise DisconnectedSupportError("gamma vanishes inside its support interval")
    lg = lg[start:stop] - logsumexp(lg[start:stop])
    n = stop - start
    up = np.zeros(n)
    down = np.zeros(n)
    if n > 1:
        d = np.diff(lg)
        up[:-1] = np.exp(np.minimum(d, 0.0))
        down[1:] = np.exp(np.minimum(-d, 0.0))
    return BirthDeathChain(np.exp(lg), lg, up, down, start)


@dataclass(frozen=True)
class HardyBracket:
    lower: float
    upper: float
    functional: float
    median: int


def hardy_lsi_bound(chain: BirthDeathChain, factor: float = HARDY_FACTOR) -> HardyBracket:
    """Bracket on the chain's log-Sobolev constant from the median-split Hardy functional.

    ``H = max over both sides of the median m of
    tail * log(1 + 1/tail) * (sum of bond resistances between m and the tail)``
    with resistance ``1 / (gamma(k) ∧ gamma(k-1))``; the bracket is
    ``[H / factor, H * factor]``.
    """
    if chain.size < 2:
        return HardyBracket(0.0, 0.0, 0.0, chain.start)
    p = chain.pmf
    res = 1.0 / chain.conductances  # res[k-1] belongs to bond (k-1, k)
    cdf = np.cumsum(p)
    m = int(np.searchsorted(cdf, 0.5))
    m = min(m, chain.size - 1)
    best = 0.0
    # right of the median: tails [k, end] for k > m
    upper_tail = np.cumsum(p[::-1])[::-1]
    for k in range(m + 1, chain.size):
        t = upper_tail[k]
        best = max(best, t * math.log1p(1.0 / t) * res[m:k].sum())
    # left of the median: tails [0, k] for k < m
    for k in range(0, m):
        t = cdf[k]
        best = max(best, t * math.log1p(1.0 / t) * res[k:m].sum())
    return HardyBracket(best / factor, best * factor, best, chain.start + m)


# ---------------------------------------------------------------------------
# split sectors


def _halves(n_sites, half1):
    if half1 is None:
        half1 = range(n_sites // 2)
    half1 = np.array(sorted(set(int(x) for x in half1)), dtype=np.int64)
    if half1.size == 0 or half1.size == n_sites or half1.min() < 0 or half1.max() >= n_sites:
        raise DomainError("the first block must be a non-empty proper subset of the sites")
    half2 = np.setdiff1d(np.arange(n_sites), half1)
    return half1, half2


def _bipartite(n_sites, src, dst):
    """Neighbour CSR in which every site of ``src`` is joined to every site of ``dst``."""
    counts = np.zeros(n_sites, dtype=np.int64)
    counts[src] = dst.size
    ptr = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
    idx = np.tile(dst, src.size).astype(np.int64)  # src is sorted, so rows come in order
    return ptr, idx


@dataclass(frozen=True, eq=False)
class CrossMoves:
    """Single-particle moves between the blocks with their weights."""

    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray
    size: int

    def apply(self, f):
        """``sum over moves of weight * f(moved)`` per source configuration."""
        return np.bincount(self.rows, self.weights * np.asarray(f)[self.cols], self.size)

    @cached_property
    def total(self) -> np.ndarray:
        return np.bincount(self.rows, self.weights, self.size)

    def gradient_sum(self, f):
        """``sum of weight * (f(moved) - f(eta))``."""
        f = np.asarray(f, dtype=float)
        return self.apply(f) - self.total * f


class SplitSector:
    """A sector with a distinguished first block ``Lambda_1`` (default: first half)."""

    def __init__(self, sector: Sector, rate: RateFunction, half1=None):
        rate.require(sector.N + 1)
        self.sector = sector
        self.rate = rate
        self.N = sector.N
        self.half1, self.half2 = _halves(sector.n_sites, half1)
        self.measure = canonical_measure(sector, rate)
        configs = sector.configs
        self.n1 = configs[:, self.half1].sum(axis=1)
        self.gamma = gamma_distribution(rate, self.half1.size, self.half2.size, self.N)
        # fibre sums of the sector measure, for the conditional weights
        lp = self.measure.log_probs
        self._log_fiber = np.full(self.N + 1, -np.inf)
        for n in range(self.N + 1):
            sel = self.n1 == n
            if sel.any():
                self._log_fiber[n] = logsumexp(lp[sel])
        self.cond_weights = np.exp(lp - self._log_fiber[self.n1])

    def __repr__(self):
        return (f"SplitSector(|L1|={self.half1.size}, |L2|={self.half2.size}, "
                f"N={self.N}, size={self.sector.size})")

    @property
    def size1(self) -> int:
        return self.half1.size

    @property
    def size2(self) -> int:
        return self.half2.size

    def fiber(self, n: int) -> np.ndarray:
        if not 0 <= n <= self.N:
            raise DomainError(f"n={n} outside 0..{self.N}")
        return np.flatnonzero(self.n1 == n)

    def gamma_from_fibers(self) -> np.ndarray:
        return np.exp(self._log_fiber)

    def factorization_residual(self) -> float:
        """Max relative gap between fibre weights and the product of block measures."""
        configs = self.sector.configs
        lf = self.rate.log_factorials
        z1 = log_partition_table(self.rate, self.size1, self.N)
        z2 = log_partition_table(self.rate, self.size2, self.N)
        n = self.n1
        prod = (-lf[configs[:, self.half1]].sum(axis=1) - z1[n]
                - lf[configs[:, self.half2]].sum(axis=1) - z2[self.N - n])
        return float(np.max(np.abs(np.expm1(prod - np.log(self.cond_weights)))))

    def _check(self, f):
        f = np.asarray(f, dtype=float)
        if f.shape[0] != self.sector.size:
            raise ShapeError(f"function has {f.shape[0]} entries, sector {self.sector.size}")
        return f

    def _cross(self, src, dst):
        configs = self.sector.configs
        ptr, idx = _bipartite(self.sector.n_sites, src, dst)
        rows, cols, c_src = kernels.sector_moves(
            configs, ptr, idx, self.sector.offsets, self.rate.values)
        # receiving site: the coordinate that grew
        grew = np.argmax(configs[cols] - configs[rows], axis=1)
        h = self.rate.h
        w = h[configs[rows, grew]] * c_src
        return CrossMoves(rows, cols, w, self.sector.size)

    @cached_property
    def cross_in(self) -> CrossMoves:
        """Moves ``y -> x`` with ``y`` in ``Lambda_2``, ``x`` in ``Lambda_1``, weight ``h(eta_x) c(eta_y)``."""
        return self._cross(self.half2, self.half1)

    @cached_property
    def cross_out(self) -> CrossMoves:
        """Moves ``x -> y`` with ``x`` in ``Lambda_1``, ``y`` in ``Lambda_2``, weight ``h(eta_y) c(eta_x)``."""
        return self._cross(self.half1, self.half2)

    @cached_property
    def generator(self) -> SparseGenerator:
        return assemble_generator(self.sector, self.rate)

    # fibre averages --------------------------------------------------------

    def cond(self, f, n: int) -> float:
        f = self._check(f)
        idx = self.fiber(n)
        if idx.size == 0:
            raise DomainError(f"fibre n={n} is empty")
        return float(self.cond_weights[idx] @ f[idx])

    def cond_all(self, f) -> np.ndarray:
        """``nu[f | eta_bar_1 = n]`` for every ``n``."""
        f = self._check(f)
        num = np.bincount(self.n1, self.cond_weights * f, self.N + 1)
        return num

    def cond_cov(self, f, g, n: int) -> float:
        idx = self.fiber(n)
        w = self.cond_weights[idx]
        fi, gi = np.asarray(f)[idx], np.asarray(g)[idx]
        return float(w @ ((fi - w @ fi) * (gi - w @ gi)))

    def cond_entropy(self, f, n: int) -> float:
        idx = self.fiber(n)
        return _entropy(self.cond_weights[idx], np.asarray(f)[idx])

    def cond_dirichlet(self, g, n: int) -> float:
        """Dirichlet form of the fibre measure, using the bonds that stay in the fibre."""
        gen = self.generator
        g = np.asarray(g, dtype=float)
        keep = (self.n1[gen.rows] == n) & (self.n1[gen.cols] == n)
        r, c = gen.rows[keep], gen.cols[keep]
        return 0.5 * float((self.cond_weights[r] * gen.rates[keep] * (g[c] - g[r]) ** 2).sum())


def conditional_expectation(f, split: SplitSector, n: int) -> float:
    """``nu[f | eta_bar_{Lambda_1} = n]`` by exact fibre average."""
    return split.cond(f, n)


def _gamma_ratio(split, num, den):
    lg = split.gamma.log_probs
    if not (np.isfinite(lg[num]) and np.isfinite(lg[den])):
        raise DegenerateError(f"gamma vanishes at {num} or {den}")
    return math.exp(lg[num] - lg[den])


def _inward_parts(split, f, n):
    pref = _gamma_ratio(split, n - 1, n) / (n * split.size2)
    cin = split.cross_in
    grad = split.cond(cin.gradient_sum(f), n - 1)
    cov = split.cond_cov(f, cin.total, n - 1)
    return pref, grad, cov


def _outward_parts(split, f, n):
    pref = -_gamma_ratio(split, n, n - 1) / ((split.N - n + 1) * split.size1)
    cout = split.cross_out
    grad = split.cond(cout.gradient_sum(f), n)
    cov = split.cond_cov(f, cout.total, n)
    return pref, grad, cov


def gradient_representation(f, split: SplitSector, n: int) -> dict:
    """Direct discrete gradient at ``n`` and its two move representations."""
    if not 1 <= n <= split.N:
        raise DomainError(f"n={n} outside 1..{split.N}")
    f = split._check(f)
    direct = split.cond(f, n) - split.cond(f, n - 1)
    p_in, g_in, c_in = _inward_parts(split, f, n)
    p_out, g_out, c_out = _outward_parts(split, f, n)
    return {"direct": direct, "inward": p_in * (g_in + c_in), "outward": p_out * (g_out + c_out)}


def ab_split(f, split: SplitSector, n: int) -> dict:
    """Gradient part ``A(n)`` and covariance part ``B(n)``; ``n >= N/2`` uses the inward moves."""
    if not 1 <= n <= split.N:
        raise DomainError(f"n={n} outside 1..{split.N}")
    f = split._check(f)
    if 2 * n >= split.N:
        pref, grad, cov = _inward_parts(split, f, n)
    else:
        pref, grad, cov = _outward_parts(split, f, n)
    return {"A": pref * grad, "B": pref * cov}


# ---------------------------------------------------------------------------
# identities


def entropy_decomposition(split: SplitSector, f) -> dict:
    """Both sides of ``Ent(f) = nu[Ent(f | eta_bar_1)] + Ent(nu[f | eta_bar_1])``."""
    f = split._check(f)
    total = _entropy(split.measure.probs, f)
    gam = split.gamma.probs
    within = sum(gam[n] * split.cond_entropy(f, n) for n in range(split.N + 1) if gam[n] > 0)
    between = _entropy(gam, split.cond_all(f))
    return {"total": total, "within": within, "between": between,
            "residual": abs(total - within - between)}


def _block_entropy(split, f, block):
    """``nu[Ent over block (others frozen)]`` as a sum over the frozen configurations."""
    configs = split.sector.configs
    other = split.half2 if block is split.half1 else split.half1
    key = np.unique(configs[:, other], axis=0, return_inverse=True)[1].ravel()
    p = split.measure.probs
    groups = np.bincount(key, p)
    m = np.bincount(key, p * f) / groups
    w = f / m[key] - 1.0
    return float(np.bincount(key, p * m[key] * _phi(w)).sum())


def tensor_bound(split: SplitSector, f) -> dict:
    """Both sides of the tensor inequality for the product fibre measures."""
    f = split._check(f)
    ent = entropy_decomposition(split, f)["within"]
    rhs = _block_entropy(split, f, split.half1) + _block_entropy(split, f, split.half2)
    return {"lhs": ent, "rhs": rhs, "slack": rhs - ent}


def conditional_dirichlet(split: SplitSector, g) -> dict:
    """``nu[E_{nu[.|eta_bar_1]}(g, g)]`` against the full form.

    The conditional forms contain the bonds inside each block only; the
    full form exceeds their average by exactly the cross-bond part.
    """
    g = split._check(g)
    gen = split.generator
    gam = split.gamma.probs
    conditional = sum(gam[n] * split.cond_dirichlet(g, n) for n in range(split.N + 1))
    p = split.measure.probs
    d2 = (g[gen.cols] - g[gen.rows]) ** 2
    terms = 0.5 * p[gen.rows] * gen.rates * d2
    cross_mask = split.n1[gen.rows] != split.n1[gen.cols]
    total = float(terms.sum())
    cross = float(terms[cross_mask].sum())
    return {"total": total, "conditional": conditional, "cross": cross,
            "residual": abs(total - conditional - cross)}


def detailed_balance_residual(sector: Sector, rate: RateFunction) -> float:
    """Max of ``|c(eta_x) nu(eta) - c(eta_y + 1) nu(eta')| / max`` over all moves, in log-space."""
    if sector.N == 0:
        return 0.0
    gen = assemble_generator(sector, rate)
    if gen.nnz == 0:
        return 0.0
    lp = canonical_measure(sector, rate).log_probs
    configs = sector.configs
    grew = np.argmax(configs[gen.cols] - configs[gen.rows], axis=1)
    c_back = rate.values[configs[gen.cols, grew]]
    a = np.log(gen.rates) + lp[gen.rows]
    b = np.log(c_back) + lp[gen.cols]
    return float(np.max(-np.expm1(-np.abs(a - b))))


# ---------------------------------------------------------------------------
# diagnostics


def gamma_ratio_constant(gamma: DiscreteMeasure) -> tuple[float, int]:
    """``max_n max(r, 1/r)`` with ``r = gamma(n-1)/gamma(n) * (N-n+1)/n``, and the maximiser."""
    lg = gamma.log_probs
    N = lg.shape[0] - 1
    best, arg = 1.0, 0
    for n in range(1, N + 1):
        if not (np.isfinite(lg[n]) and np.isfinite(lg[n - 1])):
            continue
        lr = lg[n - 1] - lg[n] + math.log((N - n + 1) / n)
        v = math.exp(abs(lr))
        if v > best:
            best, arg = v, n
    return best, arg


def gradient_bound_ratio(split: SplitSector, f, n: int) -> float:
    """``A(n)^2 N`` over the right side of the ``A(n)`` estimate with ``C = 1``.

    The length entering the estimate is the block length ``|Lambda| / 2``.
    """
    A = ab_split(f, split, n)["A"]
    sf = np.sqrt(f)
    L = split.sector.n_sites / 2
    m = max(split.cond(f, n), split.cond(f, n - 1))
    e = (_gamma_ratio(split, n - 1, n) * split.cond_dirichlet(sf, n - 1)
         + split.cond_dirichlet(sf, n))
    den = L * L * m * e
    if den <= 0:
        # single-site blocks carry no internal bond, so the right side vanishes
        return 0.0 if A == 0 else math.inf
    return A * A * split.N / den


def covariance_constants(sector: Sector, rate: RateFunction, f, measure=None) -> dict:
    """Implied ``C_L`` for the covariance bounds against ``sum c`` and ``sum h``."""
    if measure is None:
        measure = canonical_measure(sector, rate)
    p = measure.probs
    f = np.asarray(f, dtype=float)
    N = sector.N
    configs = sector.configs
    sc = rate.values[configs].sum(axis=1)
    sh = rate.h[configs].sum(axis=1)
    mf = float(p @ f)
    ent = _entropy(p, f)

    def cov(g):
        return float(p @ ((f - mf) * (g - p @ g)))

    c_c = cov(sc) ** 2 / (N * mf * ent) if ent > 0 and N > 0 else 0.0
    c_h = cov(sh) ** 2 * N / (mf * (mf + ent)) if mf > 0 else 0.0
    return {"C_L_c": c_c, "C_L_h": c_h}


def implied_AL(sector: Sector, rate: RateFunction, site: int = 0, t_grid=None,
               measure=None) -> dict:
    """Smallest ``A_L`` making both site MGF bounds hold on ``t_grid`` (default 41 points of [-1, 1])."""
    if t_grid is None:
        t_grid = np.linspace(-1.0, 1.0, 41)
    if measure is None:
        measure = canonical_measure(sector, rate)
    N = sector.N
    p = measure.probs
    occ = sector.configs[:, site]
    c = rate.values[occ]
    h = rate.h[occ]
    c0 = c - p @ c
    h0 = h - p @ h
    a_c, a_h = 0.0, 1.0
    for t in np.asarray(t_grid, dtype=float):
        if t == 0 or N == 0:
            continue
        lm = float(logsumexp(t * c0, b=p))
        a_c = max(a_c, lm / (N * t * t))
        lmh = float(logsumexp(t * N * h0, b=p))
        s = N * t * t + math.sqrt(N) * abs(t)

        def gap(a):
            return math.log(a) + a * s - lmh
        if gap(a_h) < 0:
            hi = max(2 * a_h, 2.0)
            while gap(hi) < 0:
                hi *= 2
            a_h = brentq(gap, a_h, hi, xtol=1e-14, rtol=1e-12)
    return {"A_L_c": a_c, "A_L_h": a_h}


def random_positive_functions(size: int, count: int, seed: int = 0, scale: float = 1.0):
    """``exp`` of Gaussian vectors, shape ``(count, size)``."""
    rng = np.random.default_rng(seed)
    return np.exp(scale * rng.standard_normal((count, size)))


def diagnostics_scan(grid, rate: RateFunction, n_functions: int = 20, seed: int = 0,
                     rate_name: str | None = None) -> list[dict]:
    """Bounded-constant diagnostics per ``(L, N)``; ``L`` is the number of sites, split in halves.

    Rows have keys ``quantity, rate, L, N, n, value`` and are sorted by
    ``(L, N, quantity, n)``.
    """
    name = rate_name or rate.name
    rows = []
    for L, N in sorted(set((int(a), int(b)) for a, b in grid)):
        if L < 2:
            raise DomainError("a split needs at least two sites")
        gam = gamma_distribution(rate, L // 2, L - L // 2, N)
        cst, arg = gamma_ratio_constant(gam)
        rows.append(dict(quantity="gamma_ratio_C", rate=name, L=L, N=N, n=arg, value=cst))
        if N == 0:
            continue
        split = SplitSector(enumerate_sector(L, N), rate)
        fs = random_positive_functions(split.sector.size, n_functions, seed + 7919 * L + N)
        c_gb, n_gb = 0.0, 0
        cc, ch = 0.0, 0.0
        bonds = L >= 4  # both halves need an internal bond for the A(n) estimate
        for f in fs:
            for n in range(1, N + 1) if bonds else ():
                v = gradient_bound_ratio(split, f, n)
                if v > c_gb:
                    c_gb, n_gb = v, n
            cl = covariance_constants(split.sector, rate, f, split.measure)
            cc, ch = max(cc, cl["C_L_c"]), max(ch, cl["C_L_h"])
        if bonds:
            rows.append(dict(quantity="gradient_bound_C", rate=name, L=L, N=N, n=n_gb, value=c_gb))
        rows.append(dict(quantity="C_L_sum_c", rate=name, L=L, N=N, n="", value=cc))
        rows.append(dict(quantity="C_L_sum_h", rate=name, L=L, N=N, n="", value=ch))
        al = implied_AL(split.sector, rate, measure=split.measure)
        rows.append(dict(quantity="A_L_c", rate=name, L=L, N=N, n="", value=al["A_L_c"]))
        rows.append(dict(quantity="A_L_h", rate=name, L=L, N=N, n="", value=al["A_L_h"]))
    rows.sort(key=lambda r: (r["L"], r["N"], r["quantity"], str(r["n"])))
    return rows


def gamma_chain_lsi(rate: RateFunction, sites1: int, sites2: int, N: int,
                    seed: int = 0, restarts: int = 32) -> dict:
    """LSI estimate and Hardy bracket of the birth-death chain of ``gamma``."""
    chain = birth_death_generator(gamma_distribution(rate, sites1, sites2, N))
    res = lsi_constant(chain.generator, chain.measure, seed=seed, restarts=restarts)
    hb = hardy_lsi_bound(chain)
    return {"estimate": res.estimate, "certified_lower": res.certified_lower,
            "hardy_lower": hb.lower, "hardy_upper": hb.upper, "hardy": hb.functional,
            "gap": res.gap}


def identity_residuals(split: SplitSector, fs) -> dict:
    """Max residuals of the exact identities over the functions ``fs`` (rows)."""
    out = {"entropy_decomposition": 0.0, "tensor_slack_min": math.inf,
           "conditional_dirichlet": 0.0, "gradient_inward": 0.0, "gradient_outward": 0.0,
           "ab_reconstruction": 0.0, "factorization": split.factorization_residual(),
           "gamma_fibers": float(np.max(np.abs(split.gamma_from_fibers() - split.gamma.probs)))}
    for f in fs:
        ed = entropy_decomposition(split, f)
        out["entropy_decomposition"] = max(out["entropy_decomposition"],
                                           ed["residual"] / max(ed["total"], 1e-300))
        tb = tensor_bound(split, f)
        out["tensor_slack_min"] = min(out["tensor_slack_min"], tb["slack"])
        cd = conditional_dirichlet(split, np.sqrt(f))
        out["conditional_dirichlet"] = max(out["conditional_dirichlet"],
                                           cd["residual"] / max(cd["total"], 1e-300))
        for n in range(1, split.N + 1):
            gr = gradient_representation(f, split, n)
            scale = max(abs(gr["direct"]), 1e-300)
            out["gradient_inward"] = max(out["gradient_inward"], abs(gr["inward"] - gr["direct"]) / scale)
            out["gradient_outward"] = max(out["gradient_outward"], abs(gr["outward"] - gr["direct"]) / scale)
            ab = ab_split(f, split, n)
            out["ab_reconstruction"] = max(out["ab_reconstruction"],
                                           abs(ab["A"] + ab["B"] - gr["direct"]) / scale)
    return out

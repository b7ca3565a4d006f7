"""Rate functions, lattices, sectors and the equilibrium measures.

Everything multiplicative is kept in log-space: ``c(n)!`` overflows double
precision around ``n = 170`` for linear rates.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from . import kernels
from .errors import (
    DomainError,
    EmptyInputError,
    ExtendTableError,
    InsufficientTabulationError,
    InvalidRateError,
    SectorTooLargeError,
)

DEFAULT_N_MAX = 1000
DEFAULT_SECTOR_CAP = 2_000_000
DEFAULT_TAIL_TOL = 1e-14


# ---------------------------------------------------------------------------
# rate functions


@dataclass(frozen=True, eq=False)
class RateFunction:
    """Tabulated jump rates ``c(0), ..., c(n_max)`` with certified constants.

    The constants are tight on the tabulated range: ``lipschitz_a1`` is the
    largest increment, ``envelope_A0`` the smallest ``A`` with
    ``k / A <= c(k) <= A k``, and ``(monotone_k0, monotone_a2)`` the smallest
    gap ``k0`` for which ``c(k) - c(j) >= a2 > 0`` whenever ``k >= j + k0``.
    The monotone fields are ``None`` when no such gap exists.
    """

    values: np.ndarray
    lipschitz_a1: float
    monotone_a2: float | None
    monotone_k0: int | None
    envelope_A0: float
    log_factorials: np.ndarray
    name: str = "table"

    @property
    def n_max(self) -> int:
        return self.values.shape[0] - 1

    def __call__(self, n):
        return self.values[n]

    def interp(self, r):
        """Piecewise-linear extension ``c(r)`` to real arguments in [0, n_max]."""
        r = np.asarray(r, dtype=float)
        if np.any(r < 0) or np.any(r > self.n_max):
            raise DomainError("interpolation argument outside the tabulated range")
        return np.interp(r, np.arange(self.n_max + 1), self.values)

    @cached_property
    def h(self) -> np.ndarray:
        """``h(n) = (n + 1) / c(n + 1)`` for ``0 <= n < n_max``."""
        n = np.arange(self.n_max)
        return (n + 1) / self.values[1:]

    def require(self, n: int) -> None:
        if n > self.n_max:
            raise InsufficientTabulationError(
                f"rate tabulated up to {self.n_max}, need {n}")


def validate_rate_function(values: Sequence[float], n_max: int | None = None,
                           k0: int | None = None, name: str = "table") -> RateFunction:
    """Check a rate table and compute its certified constants.

    ``k0`` fixes the monotonicity gap; by default the smallest gap in
    ``1..n_max // 2`` giving a positive ``a2`` is chosen.
    """
    v = np.array(values, dtype=np.float64)
    if v.ndim != 1 or v.shape[0] == 0:
        raise EmptyInputError("rate table is empty")
    if n_max is not None:
        if v.shape[0] < n_max + 1:
            raise InsufficientTabulationError(
                f"{v.shape[0]} values given, n_max={n_max} needs {n_max + 1}")
        v = v[: n_max + 1]
    if v[0] != 0.0:
        raise InvalidRateError("c(0) must be 0")
    if not np.all(np.isfinite(v)):
        raise InvalidRateError("rates must be finite")
    if np.any(v[1:] <= 0.0):
        bad = int(np.flatnonzero(v[1:] <= 0.0)[0]) + 1
        raise InvalidRateError(f"c({bad}) = {v[bad]} is not positive")
    v.setflags(write=False)
    top = v.shape[0] - 1

    a1 = float(np.max(np.abs(np.diff(v)))) if top > 0 else 0.0

    a2, best_k0 = None, None
    if top >= 2:
        # min over j of c(k) - c(j) for k >= j + g equals min_j (suffix-min from j + g) - c(j)
        suffix_min = np.minimum.accumulate(v[::-1])[::-1]
        gaps = [k0] if k0 is not None else range(1, top // 2 + 1)
        for g in gaps:
            if g < 1 or g > top:
                raise DomainError(f"monotonicity gap k0={g} outside 1..{top}")
            m = float(np.min(suffix_min[g:] - v[: top + 1 - g]))
            if m > 0:
                a2, best_k0 = m, int(g)
                break

    k = np.arange(1, top + 1)
    if top > 0:
        A0 = float(max(np.max(v[1:] / k), np.max(k / v[1:])))
    else:
        A0 = 1.0

    logfact = np.concatenate(([0.0], np.cumsum(np.log(v[1:]))))
    logfact.setflags(write=False)
    return RateFunction(v, a1, a2, best_k0, A0, logfact, name)


def linear(lam: float = 1.0, n_max: int = DEFAULT_N_MAX) -> RateFunction:
    """``c(n) = lam * n``: independent random walkers."""
    return validate_rate_function(lam * np.arange(n_max + 1), name=_fmt_name("linear", lam, 1.0))


def constant(value: float = 1.0, n_max: int = DEFAULT_N_MAX) -> RateFunction:
    """``c(n) = value * 1(n > 0)``; fails the monotonicity condition."""
    v = np.full(n_max + 1, float(value))
    v[0] = 0.0
    return validate_rate_function(v, name=_fmt_name("constant", value, 1.0))


def staircase(step: int = 2, n_max: int = DEFAULT_N_MAX) -> RateFunction:
    """``c(n) = step * ceil(n / step)``, e.g. ``(0, 2, 2, 4, 4, ...)`` for step 2."""
    if step < 1:
        raise DomainError("staircase step must be >= 1")
    n = np.arange(n_max + 1)
    return validate_rate_function(step * (-(-n // step)), name=_fmt_name("staircase", step, 2))


def _fmt_name(family, param, default):
    return family if param == default else f"{family}:{param:g}"


def read_rate_file(path: str | Path, n_max: int | None = None) -> RateFunction:
    """Read ``n value`` pairs (``#`` starts a comment); n must run 0, 1, 2, ..."""
    pairs = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise InvalidRateError(f"{path}:{lineno}: expected 'n value'")
        pairs.append((int(parts[0]), float(parts[1])))
    if not pairs:
        raise EmptyInputError(f"{path}: no rate entries")
    pairs.sort()
    ns = [p[0] for p in pairs]
    if ns != list(range(len(ns))):
        raise InvalidRateError(f"{path}: indices must be 0..{len(ns) - 1} without gaps")
    return validate_rate_function([p[1] for p in pairs], n_max=n_max, name=f"file:{path}")


def write_rate_file(rate: RateFunction, path: str | Path) -> None:
    lines = [f"# {rate.name}"] + [f"{n} {c!r}" for n, c in enumerate(rate.values.tolist())]
    Path(path).write_text("\n".join(lines) + "\n")


def parse_rate_spec(spec: str, n_max: int = DEFAULT_N_MAX) -> RateFunction:
    """``linear[:lam]``, ``constant[:value]``, ``staircase[:step]`` or ``file:PATH``."""
    family, _, arg = spec.partition(":")
    if family == "linear":
        return linear(float(arg) if arg else 1.0, n_max)
    if family == "constant":
        return constant(float(arg) if arg else 1.0, n_max)
    if family == "staircase":
        return staircase(int(arg) if arg else 2, n_max)
    if family == "file":
        return read_rate_file(arg)
    if Path(spec).exists():
        return read_rate_file(spec)
    raise InvalidRateError(f"unknown rate spec {spec!r}")


# ---------------------------------------------------------------------------
# lattice and sectors


@dataclass(frozen=True, eq=False)
class Box:
    """Finite nearest-neighbour lattice.

    ``Box.segment(n)`` is the 1-d segment with ``n`` sites; ``Box.cube(side, d)``
    is ``[0, side]^d`` with ``(side + 1)^d`` sites.  Sites are numbered in
    C order of their coordinates.
    """

    dimension: int
    shape: tuple
    coords: np.ndarray
    nbr_ptr: np.ndarray
    nbr_idx: np.ndarray

    @classmethod
    def segment(cls, n_sites: int) -> "Box":
        return cls.from_shape((n_sites,))

    @classmethod
    def cube(cls, side: int, dimension: int = 1) -> "Box":
        if side < 1:
            raise DomainError("cube side must be >= 1")
        return cls.from_shape((side + 1,) * dimension)

    @classmethod
    def from_shape(cls, shape) -> "Box":
        shape = tuple(int(s) for s in shape)
        if not shape or min(shape) < 1:
            raise DomainError(f"invalid box shape {shape}")
        coords = np.array(np.unravel_index(np.arange(int(np.prod(shape))), shape)).T
        nbrs = []
        for site, c in enumerate(coords):
            row = []
            for axis in range(len(shape)):
                for step in (-1, 1):
                    q = c.copy()
                    q[axis] += step
                    if 0 <= q[axis] < shape[axis]:
                        row.append(int(np.ravel_multi_index(tuple(q), shape)))
            nbrs.append(sorted(row))
        ptr = np.zeros(len(nbrs) + 1, dtype=np.int64)
        ptr[1:] = np.cumsum([len(r) for r in nbrs])
        idx = np.array([y for r in nbrs for y in r], dtype=np.int64)
        return cls(len(shape), shape, coords, ptr, idx)

    @property
    def n_sites(self) -> int:
        return self.coords.shape[0]

    @property
    def degree(self) -> np.ndarray:
        return np.diff(self.nbr_ptr)

    def neighbors(self, x: int) -> np.ndarray:
        return self.nbr_idx[self.nbr_ptr[x]:self.nbr_ptr[x + 1]]

    def edges(self):
        """Ordered neighbour pairs ``(x, y)``, each unordered bond twice."""
        return [(x, int(y)) for x in range(self.n_sites) for y in self.neighbors(x)]


def count_compositions(N: int, n_sites: int) -> int:
    """Number of ways to place N particles on ``n_sites`` sites."""
    if n_sites == 0:
        return 1 if N == 0 else 0
    return math.comb(N + n_sites - 1, n_sites - 1)


class Sector:
    """Configurations of a box with exactly ``N`` particles, in colex order.

    Colexicographic order compares the last site first; e.g. two sites with
    two particles are ordered ``(2,0), (1,1), (0,2)``.
    """

    def __init__(self, box: Box, N: int, cap: int = DEFAULT_SECTOR_CAP):
        if N < 0:
            raise DomainError("particle number must be non-negative")
        self.box = box
        self.N = int(N)
        self.n_sites = box.n_sites
        self.size = count_compositions(self.N, self.n_sites)
        if self.size > cap:
            raise SectorTooLargeError(self.size, cap)
        L, M = self.n_sites, self.N
        # counts[k, m]: placements of m particles on k sites
        counts = np.zeros((L + 1, M + 1), dtype=np.int64)
        counts[0, 0] = 1
        for k in range(1, L + 1):
            counts[k] = np.cumsum(counts[k - 1])
        # offsets[i, m, v]: configurations of sites 0..i-1 holding m - u, u < v
        offsets = np.zeros((L, M + 1, M + 1), dtype=np.int64)
        for i in range(1, L):
            for m in range(M + 1):
                vals = counts[i, m:0:-1]  # counts[i, m - u] for u = 0..m-1
                offsets[i, m, 1:m + 1] = np.cumsum(vals)
        self._counts = counts
        self.offsets = offsets

    def __len__(self):
        return self.size

    def __repr__(self):
        return f"Sector(n_sites={self.n_sites}, N={self.N}, size={self.size})"

    def rank(self, eta) -> int:
        eta = np.asarray(eta, dtype=np.int64)
        if eta.shape != (self.n_sites,) or eta.sum() != self.N or np.any(eta < 0):
            raise DomainError(f"{eta.tolist()} is not in {self!r}")
        return int(kernels.rank_many(eta[None, :], self.offsets)[0])

    def rank_many(self, configs) -> np.ndarray:
        return kernels.rank_many(np.asarray(configs, dtype=np.int64), self.offsets)

    def unrank(self, index: int) -> np.ndarray:
        if not 0 <= index < self.size:
            raise DomainError(f"index {index} outside 0..{self.size - 1}")
        eta = np.zeros(self.n_sites, dtype=np.int64)
        m = self.N
        r = int(index)
        for i in range(self.n_sites - 1, 0, -1):
            # largest v with offsets[i, m, v] <= r
            v = int(np.searchsorted(self.offsets[i, m, : m + 1], r, side="right")) - 1
            eta[i] = v
            r -= int(self.offsets[i, m, v])
            m -= v
        eta[0] = m
        return eta

    @cached_property
    def configs(self) -> np.ndarray:
        """All configurations as a ``(size, n_sites)`` array in rank order."""
        L, N = self.n_sites, self.N
        # level[m] holds all configurations of the first k sites with m particles
        level = [np.array([[m]], dtype=np.int64) for m in range(N + 1)]
        for k in range(2, L + 1):
            new = []
            for m in range(N + 1):
                blocks = []
                for v in range(m + 1):
                    prev = level[m - v]
                    blocks.append(np.hstack([prev, np.full((prev.shape[0], 1), v, dtype=np.int64)]))
                new.append(np.vstack(blocks))
            level = new
        out = level[N]
        out.setflags(write=False)
        return out


def enumerate_sector(box: Box | int, N: int, cap: int = DEFAULT_SECTOR_CAP) -> Sector:
    """Index the sector ``{eta : sum eta = N}``; an int is read as a segment length."""
    if isinstance(box, (int, np.integer)):
        box = Box.segment(int(box))
    return Sector(box, N, cap)


# ---------------------------------------------------------------------------
# measures


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Probability vector stored as log-weights and their log-sum-exp."""

    log_weights: np.ndarray
    log_normalizer: float
    sector: Sector | None = field(default=None, repr=False)

    @classmethod
    def from_log_weights(cls, log_weights, sector=None) -> "DiscreteMeasure":
        lw = np.asarray(log_weights, dtype=np.float64)
        lw.setflags(write=False)
        return cls(lw, float(logsumexp(lw)), sector)

    @property
    def space_size(self) -> int:
        return self.log_weights.shape[0]

    @cached_property
    def probs(self) -> np.ndarray:
        p = np.exp(self.log_weights - self.log_normalizer)
        p.setflags(write=False)
        return p

    @cached_property
    def log_probs(self) -> np.ndarray:
        return self.log_weights - self.log_normalizer

    def expect(self, f):
        return self.probs @ np.asarray(f, dtype=float)

    def to_csv(self, path, configs=None) -> None:
        """Write ``index,config,prob``; config is space separated (or the index)."""
        if configs is None and self.sector is not None:
            configs = self.sector.configs
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "config", "prob"])
            for i, p in enumerate(self.probs):
                cfg = " ".join(map(str, configs[i])) if configs is not None else str(i)
                w.writerow([i, cfg, repr(float(p))])


def configuration_log_weights(configs, rate: RateFunction) -> np.ndarray:
    """``-sum_x log c(eta_x)!`` for each row."""
    configs = np.asarray(configs)
    if configs.size and configs.max() > rate.n_max:
        rate.require(int(configs.max()))
    return -rate.log_factorials[configs].sum(axis=-1)


def canonical_measure(sector: Sector, rate: RateFunction) -> DiscreteMeasure:
    """Canonical measure: weights ``prod_x 1 / c(eta_x)!`` on the sector."""
    rate.require(sector.N)
    return DiscreteMeasure.from_log_weights(
        configuration_log_weights(sector.configs, rate), sector)


def log_site_weights(rate: RateFunction, alpha: float, k_max: int | None = None) -> np.ndarray:
    """``log(alpha^k / c(k)!)`` for ``k = 0..k_max`` (default: whole table)."""
    k_max = rate.n_max if k_max is None else k_max
    k = np.arange(k_max + 1)
    if alpha == 0.0:
        out = np.full(k_max + 1, -np.inf)
        out[0] = 0.0
        return out
    return k * math.log(alpha) - rate.log_factorials[: k_max + 1]


def tail_ratio(rate: RateFunction, alpha: float, k: int, growth: float = 1.0) -> float:
    """Bound on consecutive term ratios beyond index ``k``.

    With the envelope ``c(j) >= j / A0``, ``alpha^j / c(j)!`` shrinks by at
    least ``alpha * A0 / (k + 1)`` per step past ``k``; ``growth`` multiplies
    in the per-step growth of an observable (e.g. ``e^{t a1}`` for ``e^{t c}``).
    """
    return alpha * rate.envelope_A0 * growth / (k + 1)


def geometric_tail(log_last: float, ratio: float) -> float:
    """Upper bound ``exp(log_last) * r / (1 - r)`` on the neglected terms."""
    return math.exp(_log_geometric(log_last, ratio))


def _log_geometric(log_last, ratio):
    if ratio >= 1.0:
        return math.inf
    if ratio <= 0.0 or log_last == -math.inf:
        return -math.inf
    return log_last + math.log(ratio) - math.log1p(-ratio)


@dataclass(frozen=True, eq=False)
class SiteLaw:
    """Truncated grand-canonical single-site law ``p(k) ∝ alpha^k / c(k)!``.

    ``pmf`` is normalised over ``0..k_cut``; the neglected mass is at most
    ``tail_bound``.  ``log_Z`` is the log of the truncated normaliser; the
    full one exceeds it by a factor at most ``1 + tail_bound``.
    """

    rate: RateFunction
    fugacity_alpha: float
    log_Z: float
    pmf: np.ndarray
    log_pmf: np.ndarray
    k_cut: int
    tail_bound: float
    mean_rho: float
    variance_sigma2: float
    mean_error: float

    @property
    def Z(self) -> float:
        return math.exp(self.log_Z)

    def expect(self, values) -> float:
        return float(self.pmf @ np.asarray(values, dtype=float)[: self.k_cut + 1])


def grand_canonical_site_law(rate: RateFunction, alpha: float,
                             tail_tol: float = DEFAULT_TAIL_TOL) -> SiteLaw:
    """Single-site marginal of the grand-canonical measure at fugacity ``alpha``.

    The cut ``k_cut`` is the first index whose envelope-dominated tail is below
    ``tail_tol`` relative to the truncated normaliser.
    """
    if alpha < 0 or not math.isfinite(alpha):
        raise DomainError(f"fugacity must be a finite non-negative number, got {alpha}")
    if alpha == 0.0:
        pmf = np.array([1.0])
        return SiteLaw(rate, 0.0, 0.0, pmf, np.array([0.0]), 0, 0.0, 0.0, 0.0, 0.0)
    logw = log_site_weights(rate, alpha)
    K = rate.n_max
    ks = np.arange(K + 1)
    running = np.logaddexp.accumulate(logw)
    # tabulated tail sum_{k < j <= K} w_j, exact
    inner = np.append(np.logaddexp.accumulate(logw[::-1])[::-1][1:], -np.inf)
    inner_m = np.append(np.logaddexp.accumulate((logw + np.log(np.maximum(ks, 1)))[::-1])[::-1][1:], -np.inf)
    # beyond the table only the envelope c(j) >= j / A0 is assumed
    r = tail_ratio(rate, alpha, K)
    r1 = r * (K + 2) / (K + 1)
    outer = _log_geometric(logw[K], r)
    outer_m = _log_geometric(logw[K] + math.log(K + 1), r1)
    log_tail = np.logaddexp(inner, outer)
    ok = np.flatnonzero(log_tail - running <= math.log(tail_tol))
    if ok.size == 0:
        raise ExtendTableError(
            f"alpha={alpha:g}: tail below {tail_tol:g} needs more than {K} tabulated rates")
    k_cut = int(ok[0])
    log_Z = float(running[k_cut])
    log_pmf = logw[: k_cut + 1] - log_Z
    pmf = np.exp(log_pmf)
    tail = float(math.exp(log_tail[k_cut] - log_Z))
    k = ks[: k_cut + 1]
    mean = float(pmf @ k)
    var = float(pmf @ (k - mean) ** 2)
    mean_err = float(math.exp(np.logaddexp(inner_m[k_cut], outer_m) - log_Z))
    return SiteLaw(rate, float(alpha), log_Z, pmf, log_pmf, k_cut, tail, mean, var, mean_err)


def invert_fugacity(rate: RateFunction, rho: float, tol: float = 1e-12,
                    tail_tol: float = DEFAULT_TAIL_TOL, max_iter: int = 400) -> float:
    """Fugacity ``alpha`` whose site law has mean ``rho``, by bisection."""
    if rho < 0 or not math.isfinite(rho):
        raise DomainError(f"density must be non-negative, got {rho}")
    if rho == 0:
        return 0.0

    def mean(a):
        try:
            return grand_canonical_site_law(rate, a, tail_tol).mean_rho
        except ExtendTableError:
            return math.inf

    target = tol * max(rho, 1.0)
    lo, hi = 0.0, 1.0
    while mean(hi) < rho:
        lo, hi = hi, 2.0 * hi
        if hi > 1e300:
            raise ExtendTableError(f"no bracket for rho={rho}")
    if mean(hi) == math.inf and mean(lo) >= rho:
        raise ExtendTableError(f"rho={rho} beyond the tabulated range")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        m = mean(mid)
        if abs(m - rho) <= target:
            return mid
        if m < rho:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * np.finfo(float).eps * hi:
            return mid
    return 0.5 * (lo + hi)


def log_partition_table(rate: RateFunction, n_sites: int, N: int) -> np.ndarray:
    """``log Z_V^n`` for ``n = 0..N`` and ``V = n_sites``, by repeated doubling.

    ``Z_V^n`` is the sum over configurations of V sites with n particles of
    ``prod_x 1 / c(eta_x)!``.
    """
    rate.require(N)
    out = np.full(N + 1, -np.inf)
    out[0] = 0.0
    base = -rate.log_factorials[: N + 1].copy()
    v = int(n_sites)
    while v > 0:
        if v & 1:
            out = kernels.log_convolve(out, base, N + 1)
        v >>= 1
        if v:
            base = kernels.log_convolve(base, base, N + 1)
    return out


def density_ratio_scan(rate: RateFunction, rhos=None) -> dict:
    """``sigma^2(rho)/rho`` and ``alpha(rho)/rho`` over a density grid."""
    if rhos is None:
        rhos = np.geomspace(0.05, 50.0, 40)
    rhos = np.asarray(rhos, dtype=float)
    alphas = np.array([invert_fugacity(rate, r) for r in rhos])
    sig2 = np.array([grand_canonical_site_law(rate, a).variance_sigma2 for a in alphas])
    s = sig2 / rhos
    a = alphas / rhos
    return {
        "rho": rhos,
        "alpha": alphas,
        "sigma2": sig2,
        "sigma2_over_rho": s,
        "alpha_over_rho": a,
        "sigma2_interval": (float(s.min()), float(s.max())),
        "alpha_interval": (float(a.min()), float(a.max())),
    }

"""Kinetic Monte Carlo for the zero-range dynamics.

Each site ``x`` fires at rate ``deg(x) c(eta_x)`` and sends one particle to a
uniformly chosen neighbour, so every neighbour receives rate ``c(eta_x)``
as in the generator.  Event selection uses a binary indexed tree over the
site rates; the event loop itself lives in :mod:`zrlab.kernels`.

Random numbers come from Philox streams keyed by ``(seed, replica)``, so
replicas are reproducible and independent of scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import kernels
from .core import Box, RateFunction, canonical_measure, enumerate_sector
from .errors import DomainError, InsufficientDataError, ZRLabError
from .spectral import assemble_generator, spectral_gap

REBUILD_EVERY = 100_000
BUFFER = 1 << 16
UNIFORM_BATCH = 3 * (1 << 16)


class InvariantError(ZRLabError, RuntimeError):
    """The simulator reached a state the dynamics cannot produce."""


def stream(seed: int, replica: int = 0) -> np.random.Generator:
    """Counter-based generator for ``(seed, replica)``."""
    key = np.array([seed & (2**64 - 1), replica & (2**64 - 1)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _as_box(box) -> Box:
    return Box.segment(int(box)) if isinstance(box, (int, np.integer)) else box


def mode_weights(box: Box, wavenumber: int = 1) -> np.ndarray:
    """``cos(pi k (x + 1/2) / n)`` along the first axis (eigenvector of the reflected walk)."""
    n = box.shape[0]
    return np.cos(math.pi * wavenumber * (box.coords[:, 0] + 0.5) / n)


def single_particle_gap(n_sites: int, wavenumber: int = 1) -> float:
    """Eigenvalue ``2 (1 - cos(pi k / n))`` of the rate-1 reflected walk on ``n`` sites."""
    return 2.0 * (1.0 - math.cos(math.pi * wavenumber / n_sites))


class SimState:
    """Occupancies, cached site rates ``deg(x) c(eta_x)`` and their Fenwick tree."""

    def __init__(self, box: Box, rate: RateFunction, initial, seed: int = 0, replica: int = 0,
                 rng: np.random.Generator | None = None):
        self.box = _as_box(box)
        occ = np.ascontiguousarray(initial, dtype=np.int64).copy()
        if occ.shape != (self.box.n_sites,):
            raise DomainError(f"initial occupancy must have {self.box.n_sites} entries")
        if np.any(occ < 0):
            raise DomainError("initial occupancy must be non-negative")
        self.N = int(occ.sum())
        rate.require(self.N)
        self.rate = rate
        self.occupancy = occ
        self.deg = np.ascontiguousarray(self.box.degree, dtype=np.int64)
        self.rate_table = np.ascontiguousarray(rate.values[: self.N + 2], dtype=float)
        self.site_rate = self.deg * self.rate_table[occ]
        self.tree = np.zeros(self.box.n_sites + 1)
        kernels.fenwick_build(self.site_rate, self.tree)
        self.clock = 0.0
        self.rng = stream(seed, replica) if rng is None else rng
        self.seed, self.replica = seed, replica
        self.counters = np.array([0, 0, REBUILD_EVERY], dtype=np.int64)
        self.drift = np.zeros(1)
        self._u = np.empty(0)
        self._u_pos = 0

    @property
    def total_rate(self) -> float:
        return float(self.site_rate.sum())

    @property
    def events(self) -> int:
        return int(self.counters[0])

    @property
    def max_drift(self) -> float:
        return float(self.drift[0])

    def advance(self, t_stop: float, observers=(), buffer: int = BUFFER) -> None:
        """Run events until ``t_stop``, feeding ``(from, to, time)`` chunks to observers."""
        if self.N == 0:
            self.clock = max(self.clock, t_stop)
            for ob in observers:
                ob.chunk(self, np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0), t_stop)
            return
        rf = np.empty(buffer, dtype=np.int64)
        rt = np.empty(buffer, dtype=np.int64)
        rtime = np.empty(buffer)
        while True:
            if self._u_pos + 3 > self._u.size:
                self._u = self.rng.random(UNIFORM_BATCH)
                self._u_pos = 0
            t, self._u_pos, n_rec, status = kernels.kmc_advance(
                self.occupancy, self.box.nbr_ptr, self.box.nbr_idx, self.deg, self.rate_table,
                self.site_rate, self.tree, self.clock, float(t_stop), self._u, self._u_pos,
                rf, rt, rtime, 0, self.counters, self.drift)
            self.clock = t
            if status == kernels.STATUS_DEAD:
                raise InvariantError(f"total rate vanished with {self.N} particles present")
            for ob in observers:
                ob.chunk(self, rf[:n_rec], rt[:n_rec], rtime[:n_rec], t)
            if status == kernels.STATUS_HORIZON:
                return


class _Sampler:
    """Occupancy snapshots on a fixed time grid; the state at ``t_k`` includes events at ``<= t_k``."""

    def __init__(self, occ0, times, weights, rate):
        self.occ = np.array(occ0, dtype=np.int64)
        self.times = np.asarray(times, dtype=float)
        self.k = 0
        self.weights = weights
        self.rate = rate
        self.mode = np.empty(self.times.size)
        self.total_rate = np.empty(self.times.size)
        self.log_weight = np.empty(self.times.size)

    def _record(self, state):
        k = self.k
        self.mode[k] = self.weights @ self.occ
        self.total_rate[k] = float(state.deg @ self.rate.values[self.occ])
        self.log_weight[k] = -float(self.rate.log_factorials[self.occ].sum())
        self.k += 1

    def chunk(self, state, frm, to, times, t_end):
        start = 0
        while self.k < self.times.size and self.times[self.k] <= t_end:
            stop = int(np.searchsorted(times, self.times[self.k], side="right"))
            if stop > start:
                np.add.at(self.occ, to[start:stop], 1)
                np.subtract.at(self.occ, frm[start:stop], 1)
                start = stop
            self._record(state)
        if start < frm.size:
            np.add.at(self.occ, to[start:], 1)
            np.subtract.at(self.occ, frm[start:], 1)


class _Occupation:
    """Time spent in each configuration of an enumerable sector, plus one transition count pair."""

    def __init__(self, sector, occ0, horizon, pair=None):
        self.sector = sector
        self.occ = np.array(occ0, dtype=np.int64)
        self.last = 0.0
        self.horizon = horizon
        self.time = np.zeros(sector.size)
        self.pair = pair
        self.counts = np.zeros(2, dtype=np.int64)

    def chunk(self, state, frm, to, times, t_end):
        n = frm.size
        d = np.zeros((n, self.occ.size), dtype=np.int64)
        if n:
            rows = np.arange(n)
            np.add.at(d, (rows, to), 1)
            np.subtract.at(d, (rows, frm), 1)
        path = self.occ + np.cumsum(d, axis=0) if n else np.empty((0, self.occ.size), np.int64)
        states = np.vstack([self.occ[None, :], path])
        ranks = self.sector.rank_many(states)
        edges = np.concatenate([[self.last], times, [min(t_end, self.horizon)]])
        np.add.at(self.time, ranks, np.diff(edges))
        if self.pair is not None and n:
            a, b = self.pair
            self.counts[0] += int(np.sum((ranks[:-1] == a) & (ranks[1:] == b)))
            self.counts[1] += int(np.sum((ranks[:-1] == b) & (ranks[1:] == a)))
        if n:
            self.occ = path[-1].copy()
        self.last = edges[-1]


@dataclass
class Trajectory:
    """Observables sampled every ``cadence`` time units on ``[0, horizon]``."""

    times: np.ndarray
    mode_value: np.ndarray
    total_rate: np.ndarray
    log_weight: np.ndarray
    N: int
    events: int
    max_drift: float
    final: np.ndarray
    seed: int
    replica: int
    meta: dict = field(default_factory=dict)

    def rows(self):
        for i in range(self.times.size):
            yield (float(self.times[i]), float(self.mode_value[i]), self.N,
                   float(self.total_rate[i]), float(self.log_weight[i]))

    HEADER = ("t", "mode_value", "N", "total_rate", "log_weight")


def default_cadence(box: Box) -> float:
    """``0.1 / gap-estimate`` with the single-particle gap of the first axis as the estimate."""
    return 0.1 / single_particle_gap(box.shape[0])


def kmc_run(box, rate: RateFunction, initial, horizon: float, seed: int = 0, replica: int = 0,
            cadence: float | None = None, wavenumber: int = 1,
            rng: np.random.Generator | None = None) -> Trajectory:
    """Simulate from ``initial`` up to ``horizon`` and sample observables on a time grid."""
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    box = _as_box(box)
    state = SimState(box, rate, initial, seed, replica, rng)
    cadence = default_cadence(box) if cadence is None else float(cadence)
    if not cadence > 0:
        raise DomainError("cadence must be positive")
    times = np.arange(0.0, horizon + 0.5 * cadence, cadence)
    times = times[times <= horizon]
    sampler = _Sampler(state.occupancy, times, mode_weights(box, wavenumber), rate)
    state.advance(horizon, [sampler])
    if not np.array_equal(sampler.occ, state.occupancy):
        raise InvariantError("event records disagree with the kernel state")
    return Trajectory(times, sampler.mode, sampler.total_rate, sampler.log_weight, state.N,
                      state.events, state.max_drift, state.occupancy.copy(), seed, replica)


def sample_canonical(box, rate: RateFunction, N: int, rng: np.random.Generator) -> np.ndarray:
    """Exact draw from the canonical measure, site by site via partition tables."""
    box = _as_box(box)
    V = box.n_sites
    rate.require(N)
    tables = [None] * V
    z = np.full(N + 1, -np.inf)
    z[0] = 0.0
    lw = -rate.log_factorials[: N + 1]
    tables[0] = z
    for v in range(1, V):
        z = kernels.log_convolve(z, lw, N + 1)
        tables[v] = z
    occ = np.zeros(V, dtype=np.int64)
    left = N
    for x in range(V - 1):
        rest = tables[V - 1 - x]
        k = np.arange(left + 1)
        lp = lw[k] + rest[left - k]
        p = np.exp(lp - logsumexp(lp))
        occ[x] = int(min(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right"), left))
        left -= occ[x]
    occ[V - 1] = left
    return occ


def empirical_law_check(box, rate: RateFunction, N: int, horizon: float, seed: int = 0,
                        replica: int = 0, initial=None) -> dict:
    """Time-averaged configuration law versus the canonical measure, in total variation.

    ``tolerance`` is three times the CLT scale ``(1/2) sum_a sqrt(2 pi_a (1 - pi_a) / (gap T))``,
    which bounds the asymptotic variance of each occupation fraction through the
    spectral gap.  Runs with fewer than 100 events per configuration, or
    ``gap * T < 10``, are flagged ``under_sampled``.
    """
    box = _as_box(box)
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    sector = enumerate_sector(box, N)
    measure = canonical_measure(sector, rate)
    pi = measure.probs
    rng = stream(seed, replica)
    if initial is None:
        initial = sample_canonical(box, rate, N, rng)
    state = SimState(box, rate, initial, seed, replica, rng)
    ob = _Occupation(sector, state.occupancy, horizon)
    state.advance(horizon, [ob])
    emp = ob.time / horizon
    tv = 0.5 * float(np.abs(emp - pi).sum())
    if sector.size > 1:
        gap = spectral_gap(assemble_generator(sector, rate), measure)
        tol = 1.5 * float(np.sum(np.sqrt(2.0 * pi * (1 - pi) / (gap * horizon))))
        under = state.events < 100 * sector.size or gap * horizon < 10
    else:
        gap, tol, under = math.inf, 0.0, False
    return {"tv": tv, "tolerance": tol, "under_sampled": bool(under), "events": state.events,
            "gap": gap, "empirical": emp, "canonical": pi}


def reversibility_check(box, rate: RateFunction, N: int, horizon: float, seed: int = 0) -> dict:
    """Forward/backward jump counts and rates between the most likely state and a neighbour.

    Under stationarity the two counts have equal means, so ``log(n_ab / n_ba)``
    has mean zero and variance about ``1/n_ab + 1/n_ba``.  The empirical jump
    rates ``n_ab / T_a`` and ``n_ba / T_b`` are compared with the generator's.
    """
    box = _as_box(box)
    sector = enumerate_sector(box, N)
    measure = canonical_measure(sector, rate)
    gen = assemble_generator(sector, rate)
    a = int(np.argmax(measure.probs))
    sel = gen.rows == a
    b = int(gen.cols[sel][0])
    q_ab = float(gen.rates[sel][0])
    q_ba = float(gen.rates[(gen.rows == b) & (gen.cols == a)][0])
    rng = stream(seed, 0)
    state = SimState(box, rate, sample_canonical(box, rate, N, rng), seed, 0, rng)
    ob = _Occupation(sector, state.occupancy, horizon, pair=(a, b))
    state.advance(horizon, [ob])
    n_ab, n_ba = (int(v) for v in ob.counts)
    if min(n_ab, n_ba) == 0:
        raise InsufficientDataError("no transitions observed between the chosen pair")
    z = math.log(n_ab / n_ba) / math.sqrt(1 / n_ab + 1 / n_ba)
    return {"state_a": a, "state_b": b, "n_ab": n_ab, "n_ba": n_ba, "z_score": z,
            "rate_ab": n_ab / ob.time[a], "rate_ba": n_ba / ob.time[b],
            "generator_ab": q_ab, "generator_ba": q_ba,
            "balance_ratio": float(measure.probs[a] * q_ab / (measure.probs[b] * q_ba))}


def _acf(x: np.ndarray, max_lag: int, mean: float | None = None) -> np.ndarray:
    x = x - (x.mean() if mean is None else mean)
    n = x.size
    f = np.fft.rfft(x, 2 * n)
    r = np.fft.irfft(f * np.conj(f))[:max_lag + 1]
    return r / (n - np.arange(max_lag + 1))


def _fit_tau(acf: np.ndarray, cadence: float, threshold: float):
    """Exponential fit ``acf(s) / acf(0) ~ A e^{-s / tau}`` on the lags above ``threshold``."""
    rho = acf / acf[0]
    below = np.flatnonzero(rho < threshold)
    converged = below.size > 0
    stop = int(below[0]) if converged else rho.size
    if stop < 3:
        return cadence * 0.5, converged
    lags = np.arange(stop) * cadence
    slope = np.polyfit(lags, np.log(rho[:stop]), 1)[0]
    return (-1.0 / slope if slope < 0 else math.inf), converged


@dataclass
class RelaxationResult:
    tau: float
    ci_low: float
    ci_high: float
    replica_taus: np.ndarray
    unconverged: bool
    horizon: float
    cadence: float
    events: int
    trajectories: list = field(repr=False, default_factory=list)


def relaxation_estimate(box, rate: RateFunction, N: int, mode: int = 1, horizon: float | None = None,
                        seed: int = 0, replicas: int = 8, cadence: float | None = None,
                        threads: int = 1, threshold: float = 0.2,
                        burn_in: float = 0.0) -> RelaxationResult:
    """Relaxation time of the Fourier mode ``sum_x eta_x cos(pi k (x + 1/2) / n)``.

    Each replica starts from an exact canonical draw.  ``tau`` comes from an
    exponential fit to the replica-averaged autocorrelation over lags where it
    exceeds ``threshold``; the interval is ``tau +- 2 sd / sqrt(R)`` over
    per-replica fits.  Times are in generator units (rate ``c`` per neighbour).
    Default horizon is ``500 / gap-estimate``.
    """
    if N <= 0:
        raise DomainError("relaxation needs at least one particle")
    if replicas < 8:
        raise DomainError("need at least 8 replicas")
    box = _as_box(box)
    est = single_particle_gap(box.shape[0], mode)
    cadence = 0.1 / est if cadence is None else float(cadence)
    horizon = 500.0 / est if horizon is None else float(horizon)

    def one(r):
        rng = stream(seed, r)
        init = sample_canonical(box, rate, N, rng)
        tr = kmc_run(box, rate, init, horizon + burn_in, seed, r, cadence, mode, rng)
        keep = tr.times >= burn_in
        return tr, tr.mode_value[keep]

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            out = list(ex.map(one, range(replicas)))
    else:
        out = [one(r) for r in range(replicas)]
    series = [s for _, s in out]
    max_lag = max(4, series[0].size // 4)
    # canonical measures are exchangeable, so the stationary mode mean is exact
    mean = N / box.n_sites * float(mode_weights(box, mode).sum())
    acfs = np.array([_acf(s, max_lag, mean) for s in series])
    tau, conv = _fit_tau(acfs.mean(axis=0), cadence, threshold)
    taus = np.array([_fit_tau(a, cadence, threshold)[0] for a in acfs])
    finite = taus[np.isfinite(taus)]
    half = 2.0 * finite.std(ddof=1) / math.sqrt(finite.size) if finite.size > 1 else math.inf
    return RelaxationResult(tau, tau - half, tau + half, taus, not conv, horizon, cadence,
                            sum(t.events for t, _ in out), [t for t, _ in out])

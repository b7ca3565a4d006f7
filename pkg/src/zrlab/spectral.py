"""Generators on sectors, Dirichlet forms, entropy, spectral gap and LSI ratios.

Conventions: the Dirichlet form is ``E(f, g) = 1/2 sum_{i,j} nu_i Q_ij
(f_j - f_i)(g_j - g_i)``, i.e. ``-nu[f L g]``, and the log-Sobolev constant
is the smallest ``s`` with ``Ent(f) <= s E(sqrt f, sqrt f)``.  For a
reversible chain ``s >= 2 / gap``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import minimize

from . import kernels
from .core import DiscreteMeasure, RateFunction, Sector
from .errors import (
    ConvergenceError,
    DegenerateError,
    DomainError,
    ShapeError,
    TooLargeError,
)

DENSE_CUTOFF = 2000
LSI_SIZE_CAP = 20_000
# below this relative spread of g^2 the entropy is dominated by rounding
MIN_RELATIVE_SPREAD = 1e-6


@dataclass(frozen=True, eq=False)
class SparseGenerator:
    """Off-diagonal jump rates ``Q[rows, cols] = rates``; the diagonal is implied."""

    rows: np.ndarray
    cols: np.ndarray
    rates: np.ndarray
    size: int
    sector: Sector | None = field(default=None, repr=False)

    @property
    def nnz(self) -> int:
        return self.rates.shape[0]

    @property
    def diagonal(self) -> np.ndarray:
        return -np.bincount(self.rows, weights=self.rates, minlength=self.size)

    def matrix(self) -> sp.csr_matrix:
        """The generator ``L`` as a CSR matrix (rows sum to zero)."""
        off = sp.csr_matrix((self.rates, (self.rows, self.cols)), shape=(self.size, self.size))
        return (off + sp.diags(self.diagonal)).tocsr()

    def apply(self, f):
        """``(L f)(i) = sum_j Q_ij (f_j - f_i)``; ``f`` may have several columns."""
        f = np.asarray(f, dtype=float)
        diff = f[self.cols] - f[self.rows]
        w = self.rates if f.ndim == 1 else self.rates[:, None]
        out = np.zeros_like(f)
        np.add.at(out, self.rows, w * diff)
        return out

    def row_sum_residual(self) -> float:
        return float(np.max(np.abs(self.matrix().sum(axis=1)))) if self.size else 0.0

    def reversibility_residual(self, measure: DiscreteMeasure) -> float:
        """Max relative mismatch of ``nu_i Q_ij`` and ``nu_j Q_ji`` over stored jumps."""
        if self.nnz == 0:
            return 0.0
        lp = measure.log_probs
        fwd = lp[self.rows] + np.log(self.rates)
        back = sp.csr_matrix((self.rates, (self.rows, self.cols)), shape=(self.size, self.size))
        rev = np.asarray(back[self.cols, self.rows]).ravel()
        if np.any(rev <= 0):
            return math.inf
        bwd = lp[self.cols] + np.log(rev)
        return float(np.max(np.abs(np.expm1(fwd - bwd))))


def assemble_generator(sector: Sector, rate: RateFunction) -> SparseGenerator:
    """Zero-range generator on a sector: ``eta -> eta - d_x + d_y`` at rate ``c(eta_x)``."""
    rate.require(sector.N)
    box = sector.box
    if sector.N == 0:
        empty = np.zeros(0, dtype=np.int64)
        return SparseGenerator(empty, empty, np.zeros(0), sector.size, sector)
    rows, cols, rates = kernels.sector_moves(
        sector.configs, box.nbr_ptr, box.nbr_idx, sector.offsets, rate.values)
    return SparseGenerator(rows, cols, rates, sector.size, sector)


def birth_death_generator_matrix(up, down) -> SparseGenerator:
    """Nearest-neighbour chain on ``{0..n}`` with ``up[k]: k -> k+1`` and ``down[k]: k -> k-1``."""
    up = np.asarray(up, dtype=float)
    down = np.asarray(down, dtype=float)
    n = up.shape[0]
    k = np.arange(n)
    rows = np.concatenate([k[:-1], k[1:]])
    cols = np.concatenate([k[1:], k[:-1]])
    rates = np.concatenate([up[:-1], down[1:]])
    keep = rates > 0
    order = np.lexsort((cols[keep], rows[keep]))
    return SparseGenerator(rows[keep][order], cols[keep][order], rates[keep][order], n)


def _check(gen, measure, *fs):
    if measure.space_size != gen.size:
        raise ShapeError(f"measure has {measure.space_size} states, generator {gen.size}")
    out = []
    for f in fs:
        f = np.asarray(f, dtype=float)
        if f.shape[0] != gen.size:
            raise ShapeError(f"function has {f.shape[0]} entries, expected {gen.size}")
        out.append(f)
    return out


def dirichlet_form(gen: SparseGenerator, measure: DiscreteMeasure, f, g=None):
    """``E(f, g)``; a 2-d ``f`` gives one value per column."""
    if g is None:
        g = f
    f, g = _check(gen, measure, f, g)
    w = 0.5 * measure.probs[gen.rows] * gen.rates
    df = f[gen.cols] - f[gen.rows]
    dg = g[gen.cols] - g[gen.rows]
    if df.ndim == 2:
        w = w[:, None]
    return (w * df * dg).sum(axis=0)


def _phi(w):
    """``(1 + w) log(1 + w) - w`` with a series near ``w = 0``."""
    w = np.asarray(w, dtype=float)
    out = np.empty_like(w)
    small = np.abs(w) < 1e-4
    ws = w[small]
    out[small] = ws * ws * (0.5 - ws / 6.0 + ws * ws / 12.0)
    wl = w[~small]
    with np.errstate(divide="ignore", invalid="ignore"):
        out[~small] = np.where(wl <= -1.0, 1.0, (1.0 + wl) * np.log1p(wl) - wl)
    return out


def entropy(measure: DiscreteMeasure, f) -> float:
    """``Ent(f) = nu[f log f] - nu[f] log nu[f]`` with ``0 log 0 = 0``."""
    f = np.asarray(f, dtype=float)
    if f.shape[0] != measure.space_size:
        raise ShapeError("function and measure sizes differ")
    if np.any(f < 0):
        raise DomainError("entropy needs a non-negative function")
    return _entropy(measure.probs, f)


def _entropy(p, f) -> float:
    m = float(p @ f)
    if m <= 0.0:
        return 0.0
    # m * nu[phi(f / m - 1)] avoids cancellation when f is nearly constant
    return max(m * float(p @ _phi(f / m - 1.0)), 0.0)


def variance(measure: DiscreteMeasure, f) -> float:
    f = np.asarray(f, dtype=float)
    p = measure.probs
    m = p @ f
    return float(p @ (f - m) ** 2)


def covariance(measure: DiscreteMeasure, f, g) -> float:
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    p = measure.probs
    return float(p @ ((f - p @ f) * (g - p @ g)))


def _symmetrized(gen, measure):
    """``D^{1/2} (-L) D^{-1/2}`` as a sparse symmetric matrix."""
    sq = np.exp(0.5 * measure.log_probs)
    off = gen.rates * sq[gen.rows] / sq[gen.cols]
    # symmetrise the stored values to remove rounding asymmetry
    A = sp.csr_matrix((-off, (gen.rows, gen.cols)), shape=(gen.size, gen.size))
    A = 0.5 * (A + A.T)
    return (A + sp.diags(-gen.diagonal)).tocsr(), sq


def _sparse_gap(A, sq, scale, tol):
    n = A.shape[0]
    null = sq / np.linalg.norm(sq)
    # spectrum of A lies in [0, 2 scale]; the shift lifts sqrt(nu) above it
    shift = 4.0 * scale
    op = spla.LinearOperator(A.shape, dtype=float,
                             matvec=lambda x: A @ x.ravel() + shift * null * (null @ x.ravel()))
    v0 = np.cos(np.arange(n) + 0.5)
    maxiter = 20 * n
    try:
        vals, vecs = spla.eigsh(op, k=1, which="SA", tol=tol * 1e-2, v0=v0, maxiter=maxiter)
        return float(vals[0]), vecs[:, 0], "lanczos"
    except spla.ArpackNoConvergence:
        pass
    try:
        vals, vecs = spla.eigsh(A.tocsc(), k=2, sigma=-1e-3 * scale, which="LM", tol=tol * 1e-2,
                                v0=v0, maxiter=maxiter)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError(f"eigensolver did not converge: {exc}", maxiter) from exc
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]
    # the lower pair is the constant mode sqrt(nu)
    if abs(vals[0]) > 1e-8 * scale:
        raise ConvergenceError(f"lowest eigenvalue {vals[0]:g} is not the constant mode", maxiter)
    return float(vals[1]), vecs[:, 1], "shift-invert"


@dataclass(frozen=True)
class GapResult:
    gap: float
    vector: np.ndarray
    method: str


def spectral_gap(gen: SparseGenerator, measure: DiscreteMeasure, tol: float = 1e-10,
                 return_vector: bool = False, dense_cutoff: int = DENSE_CUTOFF):
    """Smallest non-zero eigenvalue of ``-L`` in ``L^2(nu)``.

    Dense ``eigh`` below ``dense_cutoff`` states.  Above it, Lanczos (ARPACK)
    for the lowest eigenvalue of the symmetrised form with the known null
    vector ``sqrt(nu)`` shifted out of the way; this needs only products with
    the sparse matrix.  Shift-invert, whose sparse LU fills in badly on
    multi-site sectors, is kept as a fallback if Lanczos stalls.  With
    ``return_vector`` a :class:`GapResult` holding the ``L^2(nu)``
    eigenfunction is returned instead of the bare gap.
    """
    _check(gen, measure)
    if gen.size < 2:
        raise DomainError("the spectral gap needs at least two states")
    A, sq = _symmetrized(gen, measure)
    if gen.size <= dense_cutoff:
        vals, vecs = scipy.linalg.eigh(A.toarray())
        gap, u, method = float(vals[1]), vecs[:, 1], "dense"
    else:
        gap, u, method = _sparse_gap(A, sq, float(np.max(-gen.diagonal)), tol)
    if gap <= 0:
        raise DomainError("generator is reducible on this sector (zero gap)")
    if not return_vector:
        return gap
    f = u / sq
    f = f / math.sqrt(float(measure.probs @ f ** 2))
    return GapResult(gap, f, method)


# ---------------------------------------------------------------------------
# log-Sobolev ratio ascent


@dataclass(frozen=True, eq=False)
class LSIResult:
    certified_lower: float
    estimate: float
    witness: np.ndarray
    degenerate: bool
    gap: float
    restarts: int
    best_restart: int


class _Ratio:
    """``R(g) = Ent(g^2) / E(g, g)`` with gradient; remembers the best evaluation.

    The form is summed over edge differences rather than as ``g^T K g``,
    which cancels catastrophically when ``g`` is close to a constant.
    """

    def __init__(self, gen, measure):
        self.p = measure.probs
        self.rows, self.cols = gen.rows, gen.cols
        self.w = self.p[gen.rows] * gen.rates
        self.n = gen.size
        self.best = -math.inf
        self.best_g = None

    def __call__(self, g):
        d = g[self.cols] - g[self.rows]
        wd = self.w * d
        dir_ = 0.5 * float(wd @ d)
        m = float(self.p @ (g * g))
        if m <= 0.0 or dir_ <= 0.0:
            return 0.0, np.zeros_like(g)
        w = (g * g) / m - 1.0
        if _spread(self.p, w) < MIN_RELATIVE_SPREAD:
            return 0.0, np.zeros_like(g)
        ent = _entropy(self.p, g * g)
        r = ent / dir_
        if r > self.best:
            self.best = r
            self.best_g = g.copy()
        pos = w > -1.0
        lg = np.zeros_like(g)
        lg[pos] = np.log1p(w[pos])
        d_ent = 2.0 * self.p * g * lg
        d_dir = np.bincount(self.cols, wd, self.n) - np.bincount(self.rows, wd, self.n)
        grad = (d_ent * dir_ - ent * d_dir) / dir_ ** 2
        return -r, -grad


def _spread(p, w):
    return float(np.max(np.abs(w[p > 0]))) if w.size else 0.0


def lsi_ratio(gen: SparseGenerator, measure: DiscreteMeasure, g) -> float:
    """``Ent(g^2) / E(g, g)``: a lower bound on the log-Sobolev constant.

    Raises :class:`DegenerateError` when ``g^2`` is constant to within
    ``MIN_RELATIVE_SPREAD``, where the quotient is rounding noise.
    """
    (g,) = _check(gen, measure, g)
    p = measure.probs
    m = float(p @ (g * g))
    e = float(dirichlet_form(gen, measure, g))
    if m <= 0 or e <= 0 or _spread(p, g * g / m - 1.0) < MIN_RELATIVE_SPREAD:
        raise DegenerateError("g is constant on the support")
    return _entropy(p, g * g) / e


def _ascend(obj, g0, gtol, maxiter, window, reference):
    # optimise u = sqrt(nu) g, in which L^2(nu) is Euclidean; in g itself the
    # gradient scales with nu and states of tiny mass barely move
    root = np.sqrt(obj.p)
    u0 = np.abs(g0) * root
    u0 = u0 / np.linalg.norm(u0)
    history = []

    def fun(u):
        val, grad = obj(u / root)
        return val, grad / root

    def hopeless(intermediate_result):
        # the ratio is often maximised only in the limit g -> constant, where
        # L-BFGS creeps; give up once even linear extrapolation of the recent
        # progress cannot reach the reference within the iteration budget
        history.append(-float(intermediate_result.fun))
        k = len(history)
        if k > window:
            gain = history[-1] - history[-window - 1]
            if gain <= 1e-13 * abs(history[-1]):
                raise StopIteration
            if reference - history[-1] > gain * (maxiter - k) / window:
                raise StopIteration

    res = minimize(fun, u0, jac=True, method="L-BFGS-B",
                   bounds=[(0.0, None)] * u0.shape[0], callback=hopeless,
                   options={"gtol": gtol, "maxiter": maxiter, "ftol": 1e-15})
    return -float(res.fun), res.x / root


def lsi_constant(gen: SparseGenerator, measure: DiscreteMeasure, restarts: int = 32,
                 seed: int = 0, gtol: float = 1e-9, maxiter: int = 5000,
                 threads: int = 1, size_cap: int = LSI_SIZE_CAP,
                 window: int = 100) -> LSIResult:
    """Multi-start ascent on ``g -> Ent(g^2) / E(g, g)``.

    ``certified_lower`` is the best ratio actually evaluated; ``estimate`` the
    best stationary value (never below the certified bound).  Starts are the
    perturbations ``1 + eps v`` of the gap eigenfunction ``v`` (their ratio
    tends to ``2 / gap`` as ``eps -> 0``), indicators of the most and least
    likely configurations, exponential tilts ``exp(+-beta v)`` and indicators
    of the tails of ``v``, then ``restarts`` seeded random positive vectors.

    Structured starts run first, in order; each run is abandoned once its
    recent progress, extrapolated linearly over the remaining iterations,
    cannot reach the best value of the structured phase.  The random phase
    compares against that fixed value, so results do not depend on
    ``threads``.
    """
    _check(gen, measure)
    n = gen.size
    if n > size_cap:
        raise TooLargeError(f"sector of {n} states exceeds the optimiser cap {size_cap}")
    if n < 2:
        raise DomainError("the log-Sobolev constant needs at least two states")
    gr = spectral_gap(gen, measure, return_vector=True)
    v = gr.vector / np.max(np.abs(gr.vector))
    rng = np.random.default_rng(seed)

    starts = []
    for eps in (1e-3, 0.01, 0.1, 0.5):
        starts += [1.0 + eps * v, 1.0 - eps * v]
    p = measure.probs
    for i in dict.fromkeys([int(np.argmax(p)), int(np.argmin(p)), 0, n - 1]):
        e = np.zeros(n)
        e[i] = 1.0
        starts.append(e)
    # tail-concentrated witnesses: tilts and level sets of v
    for beta in (2.0, 5.0, 10.0, 20.0):
        starts += [np.exp(beta * (v - 1.0)), np.exp(-beta * (v + 1.0))]
    cdf = np.cumsum(p[np.argsort(v)])
    for q in (1e-6, 1e-3, 0.05, 0.25):
        lo = np.sort(v)[min(int(np.searchsorted(cdf, q)), n - 1)]
        hi = np.sort(v)[max(min(int(np.searchsorted(cdf, 1 - q)), n - 1), 0)]
        starts += [(v <= lo).astype(float), (v >= hi).astype(float)]
    n_structured = len(starts)
    for _ in range(restarts):
        scale = rng.uniform(0.1, 2.0)
        starts.append(np.exp(scale * rng.standard_normal(n)))

    def run(g0, reference):
        obj = _Ratio(gen, measure)
        val, g = _ascend(obj, g0, gtol, maxiter, window, reference)
        return obj.best, obj.best_g, val

    results = []
    reference = -math.inf
    for g0 in starts[:n_structured]:
        results.append(run(g0, reference))
        reference = max(reference, results[-1][0])
    random_starts = starts[n_structured:]
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results += list(ex.map(lambda g0: run(g0, reference), random_starts))
    else:
        results += [run(g0, reference) for g0 in random_starts]

    best, best_g, best_i = -math.inf, None, -1
    stationary = -math.inf
    for i, (b, g, val) in enumerate(results):
        if g is not None and b > best:
            best, best_g, best_i = b, g, i
        stationary = max(stationary, val)
    degenerate = best_g is None
    if degenerate:
        e = np.zeros(n)
        e[int(np.argmin(p))] = 1.0
        best_g = e
        best = lsi_ratio(gen, measure, e)
    # report the quotient at the witness itself so Ent <= estimate * E holds exactly
    witness = best_g / math.sqrt(float(p @ best_g ** 2))
    certified = lsi_ratio(gen, measure, witness)
    estimate = max(certified, stationary)
    return LSIResult(certified, estimate, witness, degenerate, gr.gap, len(starts), best_i)

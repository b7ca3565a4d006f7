# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; semantics mirror :mod:`zrlab._kernels_py`."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, fabs, INFINITY

cnp.import_array()

DEF STATUS_HORIZON = 0
DEF STATUS_NEED_UNIFORMS = 1
DEF STATUS_BUFFER_FULL = 2
DEF STATUS_DEAD = 3


def log_convolve(a, b, Py_ssize_t n_out):
    cdef const double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    out = np.full(n_out, -np.inf)
    cdef double[::1] ov = out
    cdef Py_ssize_t na = av.shape[0], nb = bv.shape[0]
    cdef Py_ssize_t n, k, lo, hi
    cdef double m, s, v
    for n in range(n_out):
        lo = n - nb + 1
        if lo < 0:
            lo = 0
        hi = n if n < na - 1 else na - 1
        if lo > hi:
            continue
        m = -INFINITY
        for k in range(lo, hi + 1):
            v = av[k] + bv[n - k]
            if v > m:
                m = v
        if m == -INFINITY:
            continue
        s = 0.0
        for k in range(lo, hi + 1):
            s += exp(av[k] + bv[n - k] - m)
        ov[n] = m + log(s)
    return out


cdef inline long long _rank(const long long[:, ::1] cfg, Py_ssize_t row,
                            const long long[:, :, ::1] off, long long[::1] work,
                            Py_ssize_t n_sites) nogil:
    cdef long long m = 0, r = 0
    cdef Py_ssize_t i
    for i in range(n_sites):
        m += work[i]
        if i > 0:
            r += off[i, m, work[i]]
    return r


def rank_many(configs, offsets):
    cdef const long long[:, ::1] cfg = np.ascontiguousarray(configs, dtype=np.int64)
    cdef const long long[:, :, ::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef Py_ssize_t n_rows = cfg.shape[0], n_sites = cfg.shape[1]
    out = np.zeros(n_rows, dtype=np.int64)
    cdef long long[::1] ov = out
    cdef Py_ssize_t r, i
    cdef long long m, acc
    for r in range(n_rows):
        m = 0
        acc = 0
        for i in range(n_sites):
            m += cfg[r, i]
            if i > 0:
                acc += off[i, m, cfg[r, i]]
        ov[r] = acc
    return out


def sector_moves(configs, nbr_ptr, nbr_idx, offsets, rate_table):
    cdef const long long[:, ::1] cfg = np.ascontiguousarray(configs, dtype=np.int64)
    cdef const long long[::1] ptr = np.ascontiguousarray(nbr_ptr, dtype=np.int64)
    cdef const long long[::1] idx = np.ascontiguousarray(nbr_idx, dtype=np.int64)
    cdef const long long[:, :, ::1] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const double[::1] rt = np.ascontiguousarray(rate_table, dtype=np.float64)
    cdef Py_ssize_t n_rows = cfg.shape[0], n_sites = cfg.shape[1]
    cdef Py_ssize_t i, x, p, y, j, count = 0
    for i in range(n_rows):
        for x in range(n_sites):
            if cfg[i, x] > 0:
                count += ptr[x + 1] - ptr[x]
    rows = np.empty(count, dtype=np.int64)
    cols = np.empty(count, dtype=np.int64)
    rates = np.empty(count, dtype=np.float64)
    cdef long long[::1] rv = rows
    cdef long long[::1] cv = cols
    cdef double[::1] qv = rates
    work_arr = np.zeros(n_sites, dtype=np.int64)
    cdef long long[::1] work = work_arr
    cdef Py_ssize_t e = 0
    for i in range(n_rows):
        for j in range(n_sites):
            work[j] = cfg[i, j]
        for x in range(n_sites):
            if cfg[i, x] == 0:
                continue
            for p in range(ptr[x], ptr[x + 1]):
                y = idx[p]
                work[x] -= 1
                work[y] += 1
                rv[e] = i
                cv[e] = _rank(cfg, i, off, work, n_sites)
                qv[e] = rt[cfg[i, x]]
                e += 1
                work[x] += 1
                work[y] -= 1
    order = np.lexsort((cols, rows))
    return rows[order], cols[order], rates[order]


cdef void _fenwick_build(const double[::1] sr, double[::1] tr, Py_ssize_t n) nogil:
    cdef Py_ssize_t i, j
    for i in range(n + 1):
        tr[i] = 0.0
    for i in range(1, n + 1):
        tr[i] += sr[i - 1]
        j = i + (i & -i)
        if j <= n:
            tr[j] += tr[i]


cdef inline double _prefix_total(double[::1] tr, Py_ssize_t n) nogil:
    cdef double total = 0.0
    cdef Py_ssize_t i = n
    while i > 0:
        total += tr[i]
        i -= i & -i
    return total


def fenwick_build(site_rate, tree):
    cdef const double[::1] sr = np.ascontiguousarray(site_rate, dtype=np.float64)
    cdef double[::1] tr = tree
    _fenwick_build(sr, tr, sr.shape[0])


def kmc_advance(long long[::1] occ, const long long[::1] nbr_ptr, const long long[::1] nbr_idx,
                const long long[::1] deg, const double[::1] rate_table, double[::1] site_rate,
                double[::1] tree, double t, double t_stop, const double[::1] uniforms,
                Py_ssize_t u_pos, long long[::1] rec_from, long long[::1] rec_to,
                double[::1] rec_time, Py_ssize_t rec_pos, long long[::1] counters,
                double[::1] drift):
    cdef Py_ssize_t n = occ.shape[0]
    cdef Py_ssize_t n_u = uniforms.shape[0]
    cdef Py_ssize_t rec_cap = rec_from.shape[0]
    cdef long long events = counters[0], since = counters[1], rebuild_every = counters[2]
    cdef double max_drift = drift[0]
    cdef Py_ssize_t top = 1, step, pos, nxt, i, x, y, k, s, which
    cdef double total, u1, u2, u3, t_next, rem, new, delta, old_total, new_total, d
    cdef int status = STATUS_NEED_UNIFORMS
    while top * 2 <= n:
        top *= 2

    with nogil:
        while u_pos + 3 <= n_u:
            total = _prefix_total(tree, n)
            if total <= 0.0:
                status = STATUS_DEAD
                break
            u1 = uniforms[u_pos]
            u2 = uniforms[u_pos + 1]
            u3 = uniforms[u_pos + 2]
            u_pos += 3
            t_next = t - log(1.0 - u1) / total
            if t_next > t_stop:
                t = t_stop
                status = STATUS_HORIZON
                break
            t = t_next

            rem = u2 * total
            pos = 0
            step = top
            while step > 0:
                nxt = pos + step
                if nxt <= n and tree[nxt] <= rem:
                    pos = nxt
                    rem -= tree[nxt]
                step >>= 1
            if pos >= n:
                pos = n - 1
            while site_rate[pos] <= 0.0 and pos > 0:
                pos -= 1
            while site_rate[pos] <= 0.0:
                pos += 1
            x = pos

            k = <Py_ssize_t>(u3 * deg[x])
            if k >= deg[x]:
                k = deg[x] - 1
            y = nbr_idx[nbr_ptr[x] + k]

            occ[x] -= 1
            occ[y] += 1
            for which in range(2):
                s = x if which == 0 else y
                new = deg[s] * rate_table[occ[s]]
                delta = new - site_rate[s]
                site_rate[s] = new
                i = s + 1
                while i <= n:
                    tree[i] += delta
                    i += i & -i

            if rec_cap > 0:
                rec_from[rec_pos] = x
                rec_to[rec_pos] = y
                rec_time[rec_pos] = t
                rec_pos += 1

            events += 1
            since += 1
            if since >= rebuild_every:
                old_total = _prefix_total(tree, n)
                for s in range(n):
                    site_rate[s] = deg[s] * rate_table[occ[s]]
                _fenwick_build(site_rate, tree, n)
                new_total = _prefix_total(tree, n)
                d = fabs(old_total - new_total)
                if d > max_drift:
                    max_drift = d
                since = 0

            if rec_cap > 0 and rec_pos >= rec_cap:
                status = STATUS_BUFFER_FULL
                break

    counters[0] = events
    counters[1] = since
    drift[0] = max_drift
    return t, u_pos, rec_pos, status

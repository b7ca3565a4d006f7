"""Pure-Python/numpy implementations of the hot kernels.

These are the reference semantics for :mod:`zrlab._kernels` (Cython).  Both
backends consume random numbers identically, so a seeded simulation produces
the same trajectory whichever backend is active.
"""

import math

import numpy as np

STATUS_HORIZON = 0
STATUS_NEED_UNIFORMS = 1
STATUS_BUFFER_FULL = 2
STATUS_DEAD = 3


def log_convolve(a, b, n_out):
    """Log-space convolution truncated to ``n_out`` terms.

    ``out[n] = log sum_k exp(a[k] + b[n - k])`` for ``0 <= n < n_out``.
    Entries equal to ``-inf`` stand for zero weight.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    out = np.full(n_out, -np.inf)
    na, nb = a.shape[0], b.shape[0]
    for n in range(n_out):
        lo = max(0, n - nb + 1)
        hi = min(n, na - 1)
        if lo > hi:
            continue
        terms = a[lo:hi + 1] + b[n - hi:n - lo + 1][::-1]
        m = terms.max()
        if m == -np.inf:
            continue
        out[n] = m + math.log(np.exp(terms - m).sum())
    return out


def rank_many(configs, offsets):
    """Colex ranks of the rows of ``configs`` (see :class:`zrlab.core.Sector`)."""
    configs = np.asarray(configs, dtype=np.int64)
    if configs.shape[1] == 1:
        return np.zeros(configs.shape[0], dtype=np.int64)
    m = np.cumsum(configs, axis=1)
    ranks = np.zeros(configs.shape[0], dtype=np.int64)
    for i in range(1, configs.shape[1]):
        ranks += offsets[i, m[:, i], configs[:, i]]
    return ranks


def sector_moves(configs, nbr_ptr, nbr_idx, offsets, rate_table):
    """All single-particle moves of a sector.

    Returns ``(rows, cols, rates)`` with one entry per configuration ``i``,
    site ``x`` with ``eta_x > 0`` and neighbour ``y`` of ``x``: the move
    ``eta -> eta - delta_x + delta_y`` at rate ``c(eta_x)``.  Entries are
    sorted by ``(row, col)``.
    """
    configs = np.asarray(configs, dtype=np.int64)
    n_sites = configs.shape[1]
    rows, cols, rates = [], [], []
    all_idx = np.arange(configs.shape[0], dtype=np.int64)
    for x in range(n_sites):
        occupied = configs[:, x] > 0
        if not occupied.any():
            continue
        src = configs[occupied]
        src_idx = all_idx[occupied]
        c = rate_table[src[:, x]]
        for p in range(nbr_ptr[x], nbr_ptr[x + 1]):
            y = nbr_idx[p]
            moved = src.copy()
            moved[:, x] -= 1
            moved[:, y] += 1
            rows.append(src_idx)
            cols.append(rank_many(moved, offsets))
            rates.append(c)
    if not rows:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty.copy(), np.zeros(0)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    rates = np.concatenate(rates).astype(np.float64)
    order = np.lexsort((cols, rows))
    return rows[order], cols[order], rates[order]


def _fenwick_build(site_rate, tree):
    n = len(site_rate)
    for i in range(n + 1):
        tree[i] = 0.0
    for i in range(1, n + 1):
        tree[i] += site_rate[i - 1]
        j = i + (i & -i)
        if j <= n:
            tree[j] += tree[i]


def fenwick_build(site_rate, tree):
    """Rebuild the binary indexed tree (length ``n + 1``) from site rates."""
    sr = [float(v) for v in site_rate]
    tr = [0.0] * (len(sr) + 1)
    _fenwick_build(sr, tr)
    tree[:] = tr


def kmc_advance(occ, nbr_ptr, nbr_idx, deg, rate_table, site_rate, tree,
                t, t_stop, uniforms, u_pos, rec_from, rec_to, rec_time,
                rec_pos, counters, drift):
    """Run Gillespie events until ``t_stop``, the uniforms run out, or the
    event record buffer fills.

    Mutates ``occ``, ``site_rate``, ``tree``, the record buffers,
    ``counters = [events_total, events_since_rebuild, rebuild_every]`` and
    ``drift = [max_rate_cache_drift]``.  Returns ``(t, u_pos, rec_pos, status)``.
    """
    n = len(occ)
    oc = [int(v) for v in occ]
    sr = [float(v) for v in site_rate]
    tr = [float(v) for v in tree]
    ptr = [int(v) for v in nbr_ptr]
    idx = [int(v) for v in nbr_idx]
    dg = [int(v) for v in deg]
    rt = [float(v) for v in rate_table]
    rec_cap = len(rec_from)
    n_u = len(uniforms)
    events = int(counters[0])
    since = int(counters[1])
    rebuild_every = int(counters[2])
    max_drift = float(drift[0])
    top = 1
    while top * 2 <= n:
        top *= 2
    status = STATUS_NEED_UNIFORMS
    log = math.log

    while u_pos + 3 <= n_u:
        # total = prefix(n)
        total = 0.0
        i = n
        while i > 0:
            total += tr[i]
            i -= i & -i
        if total <= 0.0:
            status = STATUS_DEAD
            break
        u1 = uniforms.item(u_pos)
        u2 = uniforms.item(u_pos + 1)
        u3 = uniforms.item(u_pos + 2)
        u_pos += 3
        t_next = t - log(1.0 - u1) / total
        if t_next > t_stop:
            t = t_stop
            status = STATUS_HORIZON
            break
        t = t_next

        # site selection: first x with prefix(x + 1) > target
        rem = u2 * total
        pos = 0
        step = top
        while step > 0:
            nxt = pos + step
            if nxt <= n and tr[nxt] <= rem:
                pos = nxt
                rem -= tr[nxt]
            step >>= 1
        if pos >= n:
            pos = n - 1
        while sr[pos] <= 0.0 and pos > 0:
            pos -= 1
        while sr[pos] <= 0.0:
            pos += 1
        x = pos

        k = int(u3 * dg[x])
        if k >= dg[x]:
            k = dg[x] - 1
        y = idx[ptr[x] + k]

        oc[x] -= 1
        oc[y] += 1
        for s in (x, y):
            new = dg[s] * rt[oc[s]]
            delta = new - sr[s]
            sr[s] = new
            i = s + 1
            while i <= n:
                tr[i] += delta
                i += i & -i

        if rec_cap > 0:
            rec_from[rec_pos] = x
            rec_to[rec_pos] = y
            rec_time[rec_pos] = t
            rec_pos += 1

        events += 1
        since += 1
        if since >= rebuild_every:
            old_total = 0.0
            i = n
            while i > 0:
                old_total += tr[i]
                i -= i & -i
            for s in range(n):
                sr[s] = dg[s] * rt[oc[s]]
            _fenwick_build(sr, tr)
            new_total = 0.0
            i = n
            while i > 0:
                new_total += tr[i]
                i -= i & -i
            d = abs(old_total - new_total)
            if d > max_drift:
                max_drift = d
            since = 0

        if rec_cap > 0 and rec_pos >= rec_cap:
            status = STATUS_BUFFER_FULL
            break

    occ[:] = oc
    site_rate[:] = sr
    tree[:] = tr
    counters[0] = events
    counters[1] = since
    drift[0] = max_drift
    return t, u_pos, rec_pos, status

"""Compiled vs pure-Python kernel timings.

    python benchmarks/bench_kernels.py [--repeat 3]

Each kernel runs on the same inputs under both backends; the table reports
the best wall time and the speed-up.  Outputs are compared as a sanity check.
"""

import argparse
import time

import numpy as np

from zrlab import core, kernels


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def _cases():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=2000), rng.normal(size=2000)
    sec = core.enumerate_sector(8, 10)
    box = core.Box.segment(8)
    rate = core.staircase()

    def kmc(mod):
        n = 64
        b64 = core.Box.segment(n)
        occ = np.full(n, 4, dtype=np.int64)
        deg = b64.degree.astype(np.int64)
        table = rate.values
        site_rate = deg * table[occ]
        tree = np.zeros(n + 1)
        mod.fenwick_build(site_rate, tree)
        u = np.random.default_rng(1).random(3 * 100_000)
        rec = np.zeros(0, dtype=np.int64)
        counters = np.array([0, 0, 10**9], dtype=np.int64)
        drift = np.zeros(1)
        mod.kmc_advance(occ, b64.nbr_ptr, b64.nbr_idx, deg, table, site_rate, tree,
                        0.0, np.inf, u, 0, rec, rec.copy(), np.zeros(0), 0, counters, drift)
        return occ

    return {
        "log_convolve (2000 x 2000)": lambda m: m.log_convolve(a, b, 2000),
        f"rank_many ({sec.size} configs)": lambda m: m.rank_many(sec.configs, sec.offsets),
        f"sector_moves (L=8, N=10)": lambda m: m.sector_moves(sec.configs, box.nbr_ptr,
                                                              box.nbr_idx, sec.offsets,
                                                              rate.values),
        "kmc_advance (1e5 events)": kmc,
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    mods = kernels.backends()
    if "cython" not in mods:
        print("compiled kernels unavailable; only the Python backend is installed")
    print(f"{'kernel':<32s}{'python s':>12s}{'cython s':>12s}{'speed-up':>10s}")
    for name, fn in _cases().items():
        t = {k: _best(lambda: fn(m), args.repeat) for k, m in mods.items()}
        tp = t["python"][0]
        if "cython" in t:
            tc = t["cython"][0]
            a, c = t["python"][1], t["cython"][1]
            same = all(np.allclose(x, y) for x, y in zip(a, c)) if isinstance(a, tuple) \
                else np.allclose(a, c)
            print(f"{name:<32s}{tp:12.4f}{tc:12.4f}{tp / tc:9.1f}x" + ("" if same else "  MISMATCH"))
        else:
            print(f"{name:<32s}{tp:12.4f}{'-':>12s}{'-':>10s}")


if __name__ == "__main__":
    main()

"""Batch experiment driver.

``zrlab <experiment> [--rate R] [--L ...] [--N ...] [--seed S] [--out DIR]`` runs
one experiment over the ``rate x L x N`` grid and writes CSV/JSON reports plus a
``manifest.json``.  Exit codes: 0 clean, 1 scientific violation (a
``witness.json`` is written), 2 usage error, 3 resource cap.

Configs are flat ``key = value`` text (``#`` comments) or a flat JSON object;
command-line flags override file values.  Lists are comma separated and
``a..b`` expands to an inclusive integer range.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import platform
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy
from scipy.stats import linregress

from . import __version__, kernels
from .core import DEFAULT_N_MAX, DEFAULT_SECTOR_CAP, Box, canonical_measure, enumerate_sector, parse_rate_spec
from .decomposition import (
    SplitSector,
    detailed_balance_residual,
    diagnostics_scan,
    gamma_chain_lsi,
    identity_residuals,
    random_positive_functions,
)
from .ensembles import ensemble_ratio_table, entropy_suite, identity_suite, mgf_suite
from .errors import (
    ConfigError,
    DomainError,
    EmptyInputError,
    ExtendTableError,
    InsufficientDataError,
    InsufficientTabulationError,
    InvalidRateError,
    SectorTooLargeError,
    TooLargeError,
    ZRLabError,
)
from .simulate import Trajectory, empirical_law_check, kmc_run, sample_canonical, stream
from .spectral import assemble_generator, lsi_constant, spectral_gap

SCHEMA_VERSION = 1
ENSEMBLE_N_MAX = 4096
EXPERIMENTS = ("measures", "gap", "lsi", "decomposition", "ensembles", "simulate", "verify-all")

HEADERS = {
    "measures.csv": ("rate", "L", "N", "seed", "index", "config", "prob"),
    "spectral.csv": ("rate", "L", "N", "seed", "sector_size", "gap", "lsi_lower", "lsi_estimate",
                     "seconds"),
    "decomposition.csv": ("quantity", "rate", "L", "N", "n", "value", "seed"),
    "ensembles.csv": ("rate", "L", "N", "seed", "regime", "sup_ratio"),
    "simulate.csv": ("rate", "L", "N", "seed", "replica", "t", "mode_value", "total_rate",
                     "log_weight"),
    "scaling.csv": ("quantity", "rate", "series", "n_points", "slope", "slope_stderr",
                    "intercept"),
}

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_RESOURCE = 0, 1, 2, 3


@dataclass
class ExperimentConfig:
    experiment: str
    rate: list = field(default_factory=lambda: ["linear", "staircase"])
    L: list = field(default_factory=lambda: [2, 3, 4])
    N: list = field(default_factory=lambda: [1, 2, 3, 4])
    seed: list = field(default_factory=lambda: [0])
    tol: float = 1e-9
    out: str = "zrlab-out"
    threads: int = 1
    timing: bool = False
    restarts: int = 8
    functions: int = 20
    horizon: float = 20.0
    law_horizon: float = 1e4
    cadence: float = 0.5
    delta0: float = 0.5
    rho0: float = 1.0
    sector_cap: int = int(DEFAULT_SECTOR_CAP)

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        for key in ("rate", "L", "N", "seed"):
            if not getattr(self, key):
                raise ConfigError(f"{key} list is empty")
        if min(self.L) < 1 or min(self.N) < 0 or min(self.seed) < 0:
            raise ConfigError("L must be >= 1, N and seeds >= 0")
        if not self.tol > 0 or self.threads < 1 or self.restarts < 0 or self.functions < 1:
            raise ConfigError("tol must be positive, threads and functions >= 1, restarts >= 0")
        if not (self.horizon > 0 and self.law_horizon > 0 and self.cadence > 0):
            raise ConfigError("horizons and cadence must be positive")
        if not 0 < self.delta0 < 1 or not self.rho0 > 0:
            raise ConfigError("delta0 must lie in (0, 1) and rho0 be positive")
        for spec in self.rate:
            path = spec[5:] if spec.startswith("file:") else None
            if path is not None and not Path(path).is_file():
                raise ConfigError(f"rate file {path!r} does not exist")

    def hash(self) -> str:
        body = {k: v for k, v in asdict(self).items() if k not in ("out", "threads", "timing")}
        return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


_TYPES = {f: t for f, t in ExperimentConfig.__annotations__.items()}
_LIST_INT = ("L", "N", "seed")


def _parse_list(text, kind=int) -> list:
    if isinstance(text, (list, tuple)):
        items = []
        for t in text:
            items.extend(_parse_list(t, kind) if isinstance(t, str) else [kind(t)])
        return items
    if isinstance(text, (int, float)):
        return [kind(text)]
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if kind is int and ".." in part:
            a, b = part.split("..")
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(kind(part))
    return out


def _coerce(key: str, value):
    try:
        if key in _LIST_INT:
            return _parse_list(value, int)
        if key == "rate":
            return _parse_list(value, str)
        t = _TYPES[key]
        if t == "bool":
            if isinstance(value, bool):
                return value
            if str(value).lower() in ("1", "true", "yes", "on"):
                return True
            if str(value).lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if t == "int":
            return int(value)
        if t == "float":
            return float(value)
        return str(value)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc


def read_config_file(path) -> dict:
    """Flat ``key = value`` text or a flat JSON object; unknown keys are rejected."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {str(path)!r} does not exist")
    text = path.read_text()
    if text.lstrip().startswith("{"):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config: {exc}") from exc
        if any(isinstance(v, dict) for v in raw.values()):
            raise ConfigError("config must be flat")
    else:
        raw = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            k, v = line.split("=", 1)
            raw[k.strip()] = v.strip()
    unknown = set(raw) - set(_TYPES)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return {k: _coerce(k, v) for k, v in raw.items()}


# ---------------------------------------------------------------------------
# experiments; each returns {"files": {name: rows or dict}, "violations": [...]}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v) + 0.0)
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def _csv_body(name: str, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADERS[name])
    for r in rows:
        w.writerow([_fmt(r.get(h)) for h in HEADERS[name]])
    return buf.getvalue()


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(type(o).__name__)


def _json_body(kind: str, payload: dict) -> str:
    doc = {"schema": f"zrlab.{kind}", "schema_version": SCHEMA_VERSION, **payload}
    return json.dumps(doc, indent=2, sort_keys=True, default=_json_default,
                      allow_nan=True) + "\n"


def _cells(cfg: ExperimentConfig):
    return [(spec, L, N, seed) for spec in cfg.rate for L in sorted(set(cfg.L))
            for N in sorted(set(cfg.N)) for seed in sorted(set(cfg.seed))]


def _pmap(cfg: ExperimentConfig, fn, items):
    if cfg.threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(cfg.threads) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def _rates(cfg, n_max: int = DEFAULT_N_MAX):
    return {spec: parse_rate_spec(spec, n_max) for spec in cfg.rate}


def run_measures(cfg):
    rates = _rates(cfg)
    rows = []
    for spec, L, N, seed in _cells(cfg):
        s = enumerate_sector(L, N, cfg.sector_cap)
        p = canonical_measure(s, rates[spec]).probs
        for i, (c, q) in enumerate(zip(s.configs, p)):
            rows.append(dict(rate=spec, L=L, N=N, seed=seed, index=i,
                             config=" ".join(map(str, c)), prob=q))
    return {"files": {"measures.csv": rows}, "violations": []}


def run_spectral(cfg, with_lsi: bool):
    rates = _rates(cfg)

    def cell(key):
        spec, L, N, seed = key
        t0 = time.perf_counter()
        s = enumerate_sector(L, N, cfg.sector_cap)
        m = canonical_measure(s, rates[spec])
        row = dict(rate=spec, L=L, N=N, seed=seed, sector_size=s.size)
        if s.size < 2:
            row.update(gap="", lsi_lower="", lsi_estimate="")
        else:
            gen = assemble_generator(s, rates[spec])
            row["gap"] = spectral_gap(gen, m)
            if with_lsi:
                res = lsi_constant(gen, m, restarts=cfg.restarts, seed=seed)
                row.update(lsi_lower=res.certified_lower, lsi_estimate=res.estimate)
        row["seconds"] = round(time.perf_counter() - t0, 3) if cfg.timing else ""
        return row

    rows = _pmap(cfg, cell, _cells(cfg))
    violations = [dict(check="lsi_poincare", **r) for r in rows
                  if with_lsi and r["gap"] != "" and r["lsi_estimate"] < (2 / r["gap"]) * (1 - 1e-6)]
    return {"files": {"spectral.csv": rows}, "violations": violations}


def run_decomposition(cfg):
    rates = _rates(cfg)
    tol = cfg.tol
    rows, ident, violations = [], {}, []
    cells = [(spec, L, N, seed) for spec, L, N, seed in _cells(cfg) if L >= 2]
    if not cells:
        raise ConfigError("decomposition needs some L >= 2")

    def cell(key):
        spec, L, N, seed = key
        rate = rates[spec]
        out = [dict(r, seed=seed) for r in diagnostics_scan([(L, N)], rate, cfg.functions, seed,
                                                             rate_name=spec)]
        g = gamma_chain_lsi(rate, L // 2, L - L // 2, N, seed=seed, restarts=cfg.restarts) \
            if N >= 1 else None
        res = {}
        if g is not None:
            for q in ("estimate", "hardy_lower", "hardy_upper"):
                out.append(dict(quantity=f"gamma_lsi_{q}", rate=spec, L=L, N=N, n="",
                                value=g[q], seed=seed))
        if N >= 1:
            split = SplitSector(enumerate_sector(L, N, cfg.sector_cap), rate)
            fs = random_positive_functions(split.sector.size, cfg.functions, seed)
            res = identity_residuals(split, fs)
            res["detailed_balance"] = detailed_balance_residual(split.sector, rate)
        return key, out, res, g

    for (spec, L, N, seed), out, res, g in _pmap(cfg, cell, cells):
        rows.extend(out)
        if res:
            ident[f"{spec}|L={L}|N={N}|seed={seed}"] = res
            for k, v in res.items():
                if k == "tensor_slack_min":
                    bad = v < -tol
                else:
                    bad = v > tol
                if bad:
                    violations.append(dict(check=k, rate=spec, L=L, N=N, seed=seed, value=v))
        if g is not None and not g["hardy_lower"] <= g["estimate"] <= g["hardy_upper"]:
            violations.append(dict(check="hardy_bracket", rate=spec, L=L, N=N, seed=seed, **g))
    return {"files": {"decomposition.csv": rows, "identities.json": {"decomposition": ident}},
            "violations": violations}


def run_ensembles(cfg):
    # exponential moments at rho = 10, |t| = 2 need a longer table for certified tails
    rates = _rates(cfg, ENSEMBLE_N_MAX)
    seed = min(cfg.seed)
    volumes = sorted(set(v for v in cfg.L if v >= 2))
    if not volumes:
        raise ConfigError("ensembles needs some L >= 2")
    rows, suites, idents, violations = [], {}, {}, []
    for spec, rate in rates.items():
        for r in ensemble_ratio_table(rate, volumes, cfg.delta0, rho0=cfg.rho0):
            rows.append(dict(rate=spec, L=r["volume"], N=r["N"], seed=seed, regime=r["regime"],
                             sup_ratio=r["sup_ratio"]))
            if not math.isfinite(r["sup_ratio"]):
                violations.append(dict(check="ensemble_ratio_finite", rate=spec, **r))
        m = mgf_suite(rate, seed=seed)
        suites[spec] = m
        for name in ("herbst", "taylor", "sqrt_mgf"):
            for w in m[name]["violations"]:
                violations.append(dict(check=name, rate=spec, witness=w))
        ids = identity_suite(rate)
        idents[spec] = ids
        for k in ("shift_identity_residual", "inverse_rate_residual"):
            if ids[k] > cfg.tol:
                violations.append(dict(check=k, rate=spec, value=ids[k]))
    ent = entropy_suite(seed=seed)
    violations.extend(ent["violations"])
    rows.sort(key=lambda r: (cfg.rate.index(r["rate"]), r["L"], r["N"]))
    return {"files": {"ensembles.csv": rows,
                      "inequalities.json": {"mgf": suites, "entropy": ent,
                                            "grids": {"rho": "geomspace(0.1, 10, 12)",
                                                      "t": "linspace(-2, 2, 41)",
                                                      "delta0": cfg.delta0, "rho0": cfg.rho0}},
                      "identities.json": {"ensembles": idents}},
            "violations": violations}


def run_simulate(cfg):
    rates = _rates(cfg)

    def cell(key):
        spec, L, N, seed = key
        rate = rates[spec]
        box = Box.segment(L)
        rng = stream(seed, 0)
        init = sample_canonical(box, rate, N, rng)
        tr = kmc_run(box, rate, init, cfg.horizon, seed, 0, cfg.cadence, rng=rng)
        rows = [dict(rate=spec, L=L, N=N, seed=seed, replica=0, t=t, mode_value=m,
                     total_rate=tot, log_weight=lw)
                for t, m, _, tot, lw in tr.rows()]
        check = {"conserved": bool(tr.final.sum() == N), "max_rate_drift": tr.max_drift,
                 "events": tr.events}
        if N >= 1 and L >= 2:
            law = empirical_law_check(box, rate, N, cfg.law_horizon, seed, replica=1)
            check.update(tv=law["tv"], tolerance=law["tolerance"],
                         under_sampled=law["under_sampled"])
        return key, rows, check

    rows, checks, violations = [], {}, []
    for (spec, L, N, seed), r, c in _pmap(cfg, cell, _cells(cfg)):
        rows.extend(r)
        checks[f"{spec}|L={L}|N={N}|seed={seed}"] = c
        if not c["conserved"] or c["max_rate_drift"] > 1e-9:
            violations.append(dict(check="simulator_invariant", rate=spec, L=L, N=N, **c))
        if "tv" in c and not c["under_sampled"] and c["tv"] > c["tolerance"]:
            violations.append(dict(check="empirical_law", rate=spec, L=L, N=N, seed=seed, **c))
    return {"files": {"simulate.csv": rows, "identities.json": {"simulation": checks}},
            "violations": violations}


def _merge(results):
    files, violations = {}, []
    for res in results:
        violations.extend(res["violations"])
        for name, body in res["files"].items():
            if name.endswith(".json") and name in files:
                files[name].update(body)
            else:
                files[name] = body
    return {"files": files, "violations": violations}


def _run(cfg: ExperimentConfig):
    e = cfg.experiment
    if e == "measures":
        return run_measures(cfg)
    if e == "gap":
        return run_spectral(cfg, with_lsi=False)
    if e == "lsi":
        return run_spectral(cfg, with_lsi=True)
    if e == "decomposition":
        return run_decomposition(cfg)
    if e == "ensembles":
        return run_ensembles(cfg)
    if e == "simulate":
        return run_simulate(cfg)
    return _merge([run_measures(cfg), run_spectral(cfg, True), run_decomposition(cfg),
                   run_ensembles(cfg), run_simulate(cfg)])


# ---------------------------------------------------------------------------
# output


def write_atomic(path, text: str) -> None:
    """Write through a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _render(name, body) -> str:
    if name.endswith(".csv"):
        return _csv_body(name, body)
    return _json_body(name[:-5], body)


def run_experiment(cfg: ExperimentConfig) -> tuple[int, dict]:
    """Run, write every report plus ``manifest.json``; returns ``(exit code, bodies)``."""
    cfg.validate()
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    res = _run(cfg)
    out = Path(cfg.out)
    bodies = {name: _render(name, body) for name, body in sorted(res["files"].items())}
    for name, text in bodies.items():
        write_atomic(out / name, text)
    code = EXIT_VIOLATION if res["violations"] else EXIT_OK
    if res["violations"]:
        write_atomic(out / "witness.json", _json_body("witness", {"violations": res["violations"]}))
    manifest = {
        "schema": "zrlab.manifest", "schema_version": SCHEMA_VERSION,
        "experiment": cfg.experiment, "config": asdict(cfg), "config_hash": cfg.hash(),
        "seeds": sorted(set(cfg.seed)), "started": started,
        "wall_time_seconds": round(time.perf_counter() - t0, 3),
        "versions": {"zrlab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version(), "kernels": kernels.BACKEND},
        "files": {n: hashlib.sha256(t.encode()).hexdigest() for n, t in bodies.items()},
        "violations": len(res["violations"]), "exit_code": code,
    }
    write_atomic(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return code, bodies


# ---------------------------------------------------------------------------
# scaling report


def _slope(x, y):
    x, y = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    if np.ptp(y) == 0:
        return 0.0, 0.0, float(y[0])
    r = linregress(x, y)
    return float(r.slope), float(r.stderr), float(r.intercept)


def emit_scaling_report(rows, out=None) -> dict:
    """Log-log slopes of ``1/gap`` and ``lsi_estimate`` against ``L``, per ``N`` and pooled.

    ``rows`` are spectral-report rows (dicts with ``rate, L, N, gap, lsi_estimate``).
    Writes ``scaling.csv`` and ``scaling.txt`` into ``out`` when given.
    """
    series = {"inverse_gap": [], "lsi_estimate": []}
    for r in rows:
        if r.get("gap") not in ("", None):
            series["inverse_gap"].append((r["rate"], int(r["L"]), int(r["N"]), 1 / float(r["gap"])))
        if r.get("lsi_estimate") not in ("", None):
            series["lsi_estimate"].append((r["rate"], int(r["L"]), int(r["N"]), float(r["lsi_estimate"])))
    table = []
    for q, pts in series.items():
        for rate in sorted(set(p[0] for p in pts)):
            mine = [p for p in pts if p[0] == rate]
            if not mine:
                continue
            if len(set(p[1] for p in mine)) < 3:
                raise InsufficientDataError(f"{q} for {rate}: need at least 3 distinct L values")
            groups = [(str(N), [p for p in mine if p[2] == N]) for N in sorted(set(p[2] for p in mine))]
            groups.append(("pooled", mine))
            for name, g in groups:
                if len(set(p[1] for p in g)) < 2:
                    continue
                s, se, b = _slope([p[1] for p in g], [p[3] for p in g])
                table.append(dict(quantity=q, rate=rate, series=name, n_points=len(g), slope=s,
                                  slope_stderr=se, intercept=b))
    if not table:
        raise InsufficientDataError("no gap or lsi values to fit")
    if out is not None:
        out = Path(out)
        write_atomic(out / "scaling.csv", _csv_body("scaling.csv", table))
        lines = ["log-log slopes versus L (quantity ~ L^slope)", ""]
        for r in table:
            if r["series"] == "pooled":
                lines.append(f"{r['quantity']:>13s}  {r['rate']:<14s} slope {r['slope']:.3f}"
                             f" +- {2 * r['slope_stderr']:.3f}  ({r['n_points']} points)")
        write_atomic(out / "scaling.txt", "\n".join(lines) + "\n")
    return {"rows": table}


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="zrlab", description="Zero-range process laboratory.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS + ("report",):
        s = sub.add_parser(name)
        s.add_argument("--config", help="flat key=value or JSON config file")
        s.add_argument("--out", help="output directory")
        if name == "report":
            s.add_argument("--input", help="spectral.csv to fit (default OUT/spectral.csv)")
            continue
        s.add_argument("--rate", action="append",
                       help="rate spec: linear[:lam], constant, staircase[:step], file:PATH (repeatable)")
        s.add_argument("--L", help="site counts, e.g. 2,3,4 or 2..8")
        s.add_argument("--N", help="particle numbers, e.g. 1..12")
        s.add_argument("--seed", help="seeds, e.g. 0 or 0,1,2")
        s.add_argument("--threads", type=int)
        s.add_argument("--tol", type=float, help="identity residual tolerance")
        s.add_argument("--timing", action="store_true", default=None,
                       help="fill the seconds column (breaks byte-identical reruns)")
        s.add_argument("--restarts", type=int)
        s.add_argument("--horizon", type=float)
    return p


def config_from_args(args) -> ExperimentConfig:
    values = read_config_file(args.config) if args.config else {}
    if "experiment" in values and values["experiment"] != args.command:
        raise ConfigError("config experiment does not match the subcommand")
    values["experiment"] = args.command
    for key in ("rate", "L", "N", "seed", "threads", "tol", "timing", "restarts", "horizon", "out"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = _coerce(key, v)
    return ExperimentConfig(**values)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "report":
            values = read_config_file(args.config) if args.config else {}
            out = Path(args.out or values.get("out", "zrlab-out"))
            src = Path(args.input) if args.input else out / "spectral.csv"
            if not src.is_file():
                raise ConfigError(f"{src} does not exist")
            emit_scaling_report(_read_csv(src), out)
            print(f"wrote {out / 'scaling.csv'}")
            return EXIT_OK
        cfg = config_from_args(args)
        code, bodies = run_experiment(cfg)
    except (ConfigError, DomainError, EmptyInputError, InvalidRateError,
            InsufficientTabulationError, InsufficientDataError) as exc:
        print(f"zrlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SectorTooLargeError, TooLargeError, ExtendTableError, MemoryError) as exc:
        print(f"zrlab: resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except ZRLabError as exc:
        print(f"zrlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    for name in sorted(bodies):
        print(f"wrote {Path(cfg.out) / name}")
    if code == EXIT_VIOLATION:
        print(f"violations found; see {Path(cfg.out) / 'witness.json'}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())

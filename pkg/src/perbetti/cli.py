"""``ph``: batch command line for sampling, diagrams, Betti numbers, bounds and experiments.

Exit codes: 0 success, 2 configuration error, 3 complex budget exceeded,
4 statistical flag or failure present (``--nonfatal-flags`` turns it into 0).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from typing import Optional

import numpy as np

from . import __version__
from . import limits as L
from .config import ConfigError, ExperimentConfig, load_config
from .coupling import (BoundParams, abstract_exp_bound, betti_exp_bound, exact_mixing_matrix,
                       kernel_concentration_bound, mcdiarmid_bound)
from .filtration import BudgetExceededError, ComplexKind, UnsupportedMetricError, build_complex
from .geometry import Metric, critical_scale
from .io import CloudFormatError, format_float, load_cloud, save_cloud, save_hidden_path
from .persistence import BettiQuery, InvalidQueryError, diagram, write_diagram
from .samplers import BlockedChainProcess, DelayEmbeddingProcess, SpecError

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_FLAG = 0, 2, 3, 4


# ---------------------------------------------------------------------------
# output helpers


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    raw = json.loads(json.dumps(cfg.raw, default=str))
    raw.get("experiment", {}).pop("workers", None)
    return hashlib.sha256(json.dumps(raw, sort_keys=True).encode()).hexdigest()[:16]


class OutputDir:
    """Collects files written by one command and finishes with a manifest."""

    def __init__(self, path: str):
        self.path = path
        self.files: list[str] = []
        os.makedirs(path, exist_ok=True)

    def file(self, name: str) -> str:
        self.files.append(name)
        return os.path.join(self.path, name)

    def write_text(self, name: str, text: str) -> None:
        with open(self.file(name), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)

    def write_csv(self, name: str, header, rows) -> None:
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(format_float(v) if isinstance(v, float) else str(v) for v in row))
        self.write_text(name, "\n".join(lines) + "\n")

    def manifest(self, command: str, cfg: Optional[ExperimentConfig], seed: Optional[int]) -> None:
        digests = {}
        for name in sorted(set(self.files)):
            with open(os.path.join(self.path, name), "rb") as fh:
                digests[name] = hashlib.sha256(fh.read()).hexdigest()
        man = {"schema_version": SCHEMA_VERSION, "command": command, "code_version": __version__,
               "config_hash": config_hash(cfg) if cfg is not None else None, "seed": seed, "files": digests}
        with open(os.path.join(self.path, "manifest.json"), "w", encoding="utf-8") as fh:
            fh.write(_canonical(man))


def _queries_from_args(items) -> list[BettiQuery]:
    out = []
    for item in items or []:
        try:
            q, r, s = item.split(",")
            out.append(BettiQuery(int(q), float(r), float(s)))
        except (ValueError, InvalidQueryError) as exc:
            raise ConfigError("--query", f"expected q,r,s with r <= s, got {item!r} ({exc})") from None
    return out


def _load(args) -> Optional[ExperimentConfig]:
    return load_config(args.config) if getattr(args, "config", None) else None


def _require_process(cfg: Optional[ExperimentConfig]):
    if cfg is None or cfg.process is None:
        raise ConfigError("process", "a [process] table is required")
    return cfg.process


# ---------------------------------------------------------------------------
# sample


def cmd_sample(args) -> int:
    cfg = _load(args)
    proc = _require_process(cfg)
    n = args.n if args.n is not None else int(cfg.sample.get("n", -1))
    if n < 0:
        raise ConfigError("sample.n", "missing required entry")
    seed = args.seed if args.seed is not None else int(cfg.sample.get("seed", 0))
    sample = proc.sample(n, seed)
    out = OutputDir(args.out)
    save_cloud(sample.cloud, out.file("cloud.csv"))
    if sample.hidden_path is not None:
        save_hidden_path(sample.hidden_path, out.file("hidden.csv"), sample.sites)
    out.manifest("sample", cfg, seed)
    return EXIT_OK


# ---------------------------------------------------------------------------
# diagram / betti


def _cloud_for(args, cfg):
    if args.input:
        return load_cloud(args.input, allow_outside_cube=args.allow_outside_cube)
    proc = _require_process(cfg)
    n = int(cfg.sample.get("n", -1))
    if n < 0:
        raise ConfigError("sample.n", "give --input or a [sample] table with n")
    return proc.sample(n, int(cfg.sample.get("seed", 0))).cloud


def _complex_settings(args, cfg):
    c = cfg.complex if cfg is not None else None
    kind = ComplexKind.parse(args.kind or (c.kind if c else "rips"))
    max_dim = args.max_dim if args.max_dim is not None else (c.max_dim if c else 1)
    max_radius = args.max_radius if args.max_radius is not None else (c.max_radius if c else math.inf)
    metric = Metric.parse(args.metric or (c.metric if c else "euclidean"))
    budget = c.budget if c else L.DEFAULT_BUDGET
    if kind is ComplexKind.RIPS and math.isinf(max_radius) and max_dim > 1:
        raise ConfigError("complex.max_radius", "an explicit max_radius is required for max_dim > 1")
    return kind, max_dim, max_radius, metric, budget


def cmd_diagram(args) -> int:
    cfg = _load(args)
    cloud = _cloud_for(args, cfg)
    kind, max_dim, max_radius, metric, budget = _complex_settings(args, cfg)
    cx = build_complex(cloud, kind, metric, max_dim, max_radius, budget)
    diag = diagram(cx, clearing=args.clearing)
    if args.output:
        write_diagram(diag, args.output)
    else:
        out = OutputDir(args.out)
        write_diagram(diag, out.file("diagram.csv"))
        out.manifest("diagram", cfg, None)
    return EXIT_OK


def cmd_betti(args) -> int:
    cfg = _load(args)
    cloud = _cloud_for(args, cfg)
    kind, max_dim, _, metric, budget = _complex_settings(args, cfg)
    queries = _queries_from_args(args.query) or (list(cfg.queries) if cfg is not None else [])
    if not queries:
        raise ConfigError("queries", "no queries given")
    n = len(cloud)
    eta = critical_scale(n, cloud.dim_p) if args.scale == "critical" and n else 1.0
    vals = L.betti_values(cloud, queries, kind, max_dim, metric, eta=eta, budget=budget) if n else [0] * len(queries)
    rows = [(q.q, float(q.r), float(q.s), b, float(b / n) if n else 0.0) for q, b in zip(queries, vals)]
    out = OutputDir(args.out)
    out.write_csv("betti.csv", ["q", "r", "s", "beta", "beta_per_point"], rows)
    out.manifest("betti", cfg, None)
    return EXIT_OK


# ---------------------------------------------------------------------------
# bounds


def _bound_rows(cfg: ExperimentConfig) -> list[tuple]:
    b = cfg.bounds
    if not b:
        raise ConfigError("bounds", "missing table")
    kind = str(b.get("kind", "betti"))
    t_grid = b.get("t_grid")
    if not isinstance(t_grid, list) or not t_grid:
        raise ConfigError("bounds.t_grid", "expected a nonempty list")
    rows = []
    try:
        if kind in ("betti", "abstract"):
            keys = {"n", "a", "q", "q_tilde", "c1", "c2", "radius", "f_star", "gamma_inf", "p", "eta",
                    "covering_log", "ball_sup"}
            params = {k: v for k, v in b.items() if k in keys}
            if "metric" in b:
                params["metric"] = Metric.parse(b["metric"])
            fn = betti_exp_bound if kind == "betti" else abstract_exp_bound
            for t in t_grid:
                res = fn(BoundParams(t=float(t), **params))
                rows.append((float(t), res.value, int(res.trivial)))
        elif kind == "kernel":
            for t in t_grid:
                res = kernel_concentration_bound(int(b["n"]), float(t), float(b.get("f_star", 1.0)), float(b["mu"]))
                rows.append((float(t), res.value, int(res.trivial)))
        elif kind == "mcdiarmid":
            proc = _require_process(cfg)
            if not isinstance(proc, (BlockedChainProcess, DelayEmbeddingProcess)):
                raise ConfigError("process.kind", "McDiarmid bounds need a hidden-chain process")
            n = int(b["n"])
            G = exact_mixing_matrix(proc.hidden, n)
            c = np.asarray(b.get("c", [1.0] * n), dtype=float)
            for t in t_grid:
                res = mcdiarmid_bound(G, c, float(t))
                rows.append((float(t), res.value, int(res.trivial)))
        else:
            raise ConfigError("bounds.kind", f"unknown bound {kind!r}")
    except KeyError as exc:
        raise ConfigError(f"bounds.{exc.args[0]}", "missing required entry") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("bounds", str(exc)) from None
    return rows


def cmd_bounds(args) -> int:
    cfg = _load(args)
    if cfg is None:
        raise ConfigError("--config", "required")
    rows = _bound_rows(cfg)
    out = OutputDir(args.out)
    out.write_csv("bounds.csv", ["t", "bound", "trivial"], rows)
    out.manifest("bounds", cfg, None)
    return EXIT_OK


# ---------------------------------------------------------------------------
# experiment


def experiment_plan(cfg: ExperimentConfig, workers: int) -> dict:
    e = cfg.experiment
    if not e:
        raise ConfigError("experiment", "missing table")
    plan = {"type": e["type"], "seed": cfg.seed, "workers": workers, "config_hash": config_hash(cfg)}
    if e["type"] in ("compare", "estimate", "one_dim", "vague", "slln", "concentration"):
        proc = _require_process(cfg)
        if not len(cfg.queries):
            raise ConfigError("queries", "at least one query is required")
        plan.update({"process": proc.tag, "p": proc.p, "complex": cfg.complex.kind.value,
                     "max_dim": cfg.complex.max_dim, "queries": [[q.q, q.r, q.s] for q in cfg.queries]})
        if e["type"] != "concentration":
            if "n_grid" not in e:
                raise ConfigError("experiment.n_grid", "missing required entry")
            plan["n_grid"] = list(e["n_grid"])
        if e["type"] not in ("slln",):
            plan["replications"] = int(e.get("replications", 10))
        if e["type"] == "concentration":
            if "n" not in e:
                raise ConfigError("experiment.n", "missing required entry")
            plan["n"] = int(e["n"])
            plan["replications"] = int(e.get("replications", 1000))
        if e["type"] == "one_dim" and any(q.q != 0 or q.r != q.s for q in cfg.queries):
            raise ConfigError("queries", "the one-dimensional check needs q = 0 and r = s")
    elif e["type"] == "geometric_lemma":
        plan.update({"n_max": int(e.get("n_max", 12)), "trials": int(e.get("trials", 500))})
    elif e["type"] == "kernel_tail":
        plan.update({"n": int(e.get("n", 1000)), "replications": int(e.get("replications", 1000))})
    elif e["type"] == "mcdiarmid":
        proc = _require_process(cfg)
        if not isinstance(proc, BlockedChainProcess):
            raise ConfigError("process.kind", "the McDiarmid experiment needs a blocked chain")
        plan.update({"n": int(e.get("n", 200)), "replications": int(e.get("replications", 1000))})
    return plan


def _estimate_rows(name: str, ests) -> tuple[list, list]:
    summary, raw = [], []
    for e in ests:
        for k, n in enumerate(e.n_grid):
            summary.append((name, e.query.q, float(e.query.r), float(e.query.s), n,
                            float(e.estimates[k]), float(e.std_errors[k]), e.replications))
            for j, v in enumerate(e.values[k]):
                raw.append((name, e.query.q, float(e.query.r), float(e.query.s), n, j, float(v)))
    return summary, raw


RECT_HEADER = ["process", "q", "r", "s", "n", "mean", "se", "R"]
RAW_HEADER = ["process", "q", "r", "s", "n", "replication", "value"]


def run_experiment(cfg: ExperimentConfig, workers: int) -> tuple[dict, dict]:
    """Returns (results for the JSON summary, csv tables by file name)."""
    e = cfg.experiment
    etype = e["type"]
    seed = cfg.seed
    c = cfg.complex
    tables: dict = {}
    if etype in ("compare", "estimate", "one_dim"):
        proc = cfg.process
        n_grid, R = tuple(e["n_grid"]), int(e.get("replications", 10))
        ests = L.estimate_limit(proc, cfg.queries, n_grid, R, c.kind, seed, c.max_dim, c.metric, workers, c.budget)
        rect, raw = _estimate_rows(proc.tag, ests)
        if etype == "compare":
            oracle = proc.matched_binomial()
            oests = L.estimate_limit(oracle, cfg.queries, n_grid, R, c.kind, seed, c.max_dim, c.metric, workers,
                                     c.budget)
            r2, w2 = _estimate_rows(oracle.tag, oests)
            rect, raw = rect + r2, raw + w2
            result = L.compare_estimates(ests, oests, int(e.get("max_flags", 1)))
        elif etype == "one_dim":
            rows = [dict(q=est.query.q, r=est.query.r, s=est.query.s,
                         **L.compare_with_value(est, L.exponential_gap_density(est.query.r)))
                    for est in ests]
            n_fail = sum(r["status"] == L.FAIL for r in rows)
            n_flag = sum(r["status"] == L.FLAG for r in rows)
            result = {"status": L.FAIL if n_fail else (L.FLAG if n_flag else L.PASS), "rectangles": rows}
        else:
            result = {"status": L.PASS}
        tables["rectangles.csv"] = (RECT_HEADER, rect)
        tables["replications.csv"] = (RAW_HEADER, raw)
    elif etype == "vague":
        table = L.vague_convergence_check(cfg.process, cfg.queries, tuple(e["n_grid"]), int(e.get("replications", 10)),
                                          seed, c.kind, c.max_dim, c.metric, workers, c.budget)
        rows = []
        for t in table:
            for n, m, se in zip(t["n_grid"], t["estimates"], t["std_errors"]):
                rows.append((cfg.process.tag, t["q"], float(t["r"]), float(t["s"]), n, float(m), float(se),
                             int(e.get("replications", 10))))
        tables["rectangles.csv"] = (RECT_HEADER, rows)
        flags = sum(not t["cauchy"] for t in table)
        result = {"status": L.PASS if flags == 0 else L.FLAG, "table": table}
    elif etype == "slln":
        traj = [L.slln_check(cfg.process, q, tuple(e["n_grid"]), seed, c.kind, c.max_dim, c.metric, c.budget)
                for q in cfg.queries]
        tol = float(e.get("relative_spread_tol", 0.05))
        status = L.PASS if all(t["relative_spread"] <= tol for t in traj) else L.FLAG
        rows = [(cfg.process.tag, q.q, float(q.r), float(q.s), n, float(v))
                for q, t in zip(cfg.queries, traj) for n, v in zip(t["n_grid"], t["trajectory"])]
        tables["trajectory.csv"] = (["process", "q", "r", "s", "n", "value"], rows)
        result = {"status": status, "trajectories": traj}
    elif etype == "geometric_lemma":
        result = L.geometric_lemma_suite(int(e.get("n_max", 12)), int(e.get("trials", 500)), seed)
    elif etype == "concentration":
        reps = [L.concentration_suite(cfg.process, q, int(e["n"]), int(e.get("replications", 1000)), seed,
                                      float(e.get("a", 0.75)), tuple(e.get("t_grid", (0.05, 0.1, 0.2, 0.5))),
                                      c.kind, c.max_dim, float(e.get("f_star", 1.0)), float(e.get("gamma_inf", 1.0)),
                                      e.get("n_compare"), workers, c.budget,
                                      min_replications=int(e.get("min_replications", 1000)))
                for q in cfg.queries]
        result = {"status": L.FAIL if any(r["status"] == L.FAIL for r in reps) else L.PASS, "reports": reps}
    elif etype == "kernel_tail":
        result = L.kernel_tail_experiment(int(e.get("n", 1000)), int(e.get("replications", 1000)), seed,
                                          tuple(e.get("t_grid", (4, 6, 8))))
    elif etype == "mcdiarmid":
        result = L.mcdiarmid_experiment(cfg.process.hidden, int(e.get("n", 200)), int(e.get("replications", 1000)),
                                        seed)
    else:  # pragma: no cover - rejected at parse time
        raise ConfigError("experiment.type", etype)
    return result, tables


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def cmd_experiment(args) -> int:
    cfg = _load(args)
    if cfg is None:
        raise ConfigError("--config", "required")
    workers = args.workers if args.workers is not None else cfg.workers
    plan = experiment_plan(cfg, workers)
    if args.dry_run:
        sys.stdout.write(_canonical(_jsonable(plan)))
        return EXIT_OK
    result, tables = run_experiment(cfg, workers)
    out = OutputDir(args.out)
    for name, (header, rows) in tables.items():
        out.write_csv(name, header, rows)
    plan.pop("workers")
    summary = {"schema_version": SCHEMA_VERSION, "status": result["status"], "plan": plan,
               "provenance": {"config_hash": config_hash(cfg), "seed": cfg.seed, "code_version": __version__},
               "results": result}
    out.write_text("summary.json", _canonical(_jsonable(summary)))
    out.manifest("experiment", cfg, cfg.seed)
    flags_fatal = bool(cfg.experiment.get("flags_fatal", True)) and not args.nonfatal_flags
    if result["status"] != L.PASS and flags_fatal:
        return EXIT_FLAG
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ph", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="TOML configuration file")
        p.add_argument("--out", required=out_required, help="output directory (created if missing)")

    p = sub.add_parser("sample", help="draw one sample and write cloud.csv (+ hidden.csv)")
    common(p)
    p.add_argument("--n", type=int, help="sample size (overrides sample.n)")
    p.add_argument("--seed", type=int, help="seed (overrides sample.seed)")
    p.set_defaults(func=cmd_sample)

    def complex_flags(p):
        p.add_argument("--input", help="cloud CSV; otherwise the configured process is sampled")
        p.add_argument("--allow-outside-cube", action="store_true",
                       help="min-max rescale inputs instead of rejecting coordinates outside [0, 1]")
        p.add_argument("--kind", choices=["rips", "cech"], help="complex kind")
        p.add_argument("--max-dim", type=int, help="largest simplex dimension")
        p.add_argument("--max-radius", type=float, help="largest filtration value")
        p.add_argument("--metric", choices=["euclidean", "chebyshev"], help="distance (Rips only for chebyshev)")

    p = sub.add_parser("diagram", help="persistence diagram of a cloud as CSV (dim,birth,death)")
    common(p, out_required=False)
    complex_flags(p)
    p.add_argument("--output", help="diagram CSV path (instead of --out/diagram.csv)")
    p.add_argument("--clearing", action="store_true", help="use the clearing optimization")
    p.set_defaults(func=cmd_diagram)

    p = sub.add_parser("betti", help="persistent Betti numbers of a cloud for the configured queries")
    common(p)
    complex_flags(p)
    p.add_argument("--query", action="append", help="q,r,s (repeatable; overrides [[queries]])")
    p.add_argument("--scale", choices=["none", "critical"], default="none",
                   help="evaluate on the cloud scaled by n^(1/p) (critical) or as is")
    p.set_defaults(func=cmd_betti)

    p = sub.add_parser("bounds", help="evaluate a concentration bound over bounds.t_grid")
    common(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("experiment", help="run the configured Monte Carlo experiment")
    common(p, out_required=False)
    p.add_argument("--workers", type=int, help="worker processes (outputs do not depend on it)")
    p.add_argument("--dry-run", action="store_true", help="print the resolved plan and write nothing")
    p.add_argument("--nonfatal-flags", action="store_true", help="exit 0 even if statistical flags are present")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in ("diagram",) and not (args.output or args.out):
        parser.error("diagram needs --output or --out")
    if args.command == "experiment" and not args.dry_run and not args.out:
        parser.error("experiment needs --out unless --dry-run is given")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SpecError, InvalidQueryError, CloudFormatError, UnsupportedMetricError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceededError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())

"""Experiment configuration files (TOML) and their eager validation.

Example::

    [process]
    kind = "blocked_chain"       # binomial | blocked_chain | density_chain
                                 # | delay_embedding | lattice_field
    p = 2

    [process.density]            # regular m^p grid, weights in C order
    grid = 2
    weights = [1.6, 0.8, 0.8, 0.8]

    [process.hidden]             # or: transition = [[...], ...]
    stay = 0.6

    [complex]
    kind = "rips"
    max_dim = 2

    [experiment]
    type = "compare"
    n_grid = [1000, 2000]
    replications = 50
    seed = 7

    [[queries]]
    q = 0
    r = 0.0
    s = 0.8

Errors are raised as :class:`ConfigError` carrying the dotted path of the
offending entry (e.g. ``process.density.blocks``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .filtration import ComplexKind
from .geometry import Metric
from .limits import DEFAULT_BUDGET, RectangleGrid
from .persistence import BettiQuery, InvalidQueryError
from .samplers import (BinomialProcess, BlockedChainProcess, BlockedDensity, DelayEmbeddingProcess,
                       DensityChainProcess, DensityChainSpec, HiddenChainSpec, LatticeFieldProcess,
                       LatticeFieldSpec, SpecError)

EXPERIMENT_TYPES = ("compare", "estimate", "one_dim", "slln", "vague", "geometric_lemma", "concentration",
                    "kernel_tail", "mcdiarmid")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _get(table: dict, key: str, path: str, default=..., kind=None):
    if key not in table:
        if default is ...:
            raise ConfigError(f"{path}.{key}" if path else key, "missing required entry")
        return default
    value = table[key]
    if kind is not None:
        try:
            if kind is int and (isinstance(value, bool) or float(value) != int(value)):
                raise ValueError
            value = kind(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{path}.{key}" if path else key, f"expected {kind.__name__}, got {value!r}") from None
    return value


def _table(root: dict, key: str, path: str, required: bool = True) -> dict:
    sub = root.get(key)
    full = f"{path}.{key}" if path else key
    if sub is None:
        if required:
            raise ConfigError(full, "missing table")
        return {}
    if not isinstance(sub, dict):
        raise ConfigError(full, "expected a table")
    return sub


def _wrap(path: str, fn, *args, **kw):
    """Run a spec constructor, re-raising its errors under ``path``."""
    try:
        return fn(*args, **kw)
    except SpecError as exc:
        raise ConfigError(f"{path}.{exc.field}", str(exc).split(": ", 1)[-1]) from None
    except (ValueError, TypeError) as exc:
        raise ConfigError(path, str(exc)) from None


def parse_density(table: dict, p: int, path: str) -> BlockedDensity:
    if "grid" in table:
        m = _get(table, "grid", path, kind=int)
        if m < 1:
            raise ConfigError(f"{path}.grid", "must be positive")
        weights = table.get("weights")
        if weights is not None and len(weights) != m**p:
            raise ConfigError(f"{path}.weights", f"expected {m**p} weights for a {m}^{p} grid")
        return _wrap(path, BlockedDensity.grid, m, p, weights)
    if "lows" in table or "highs" in table:
        lows, highs = _get(table, "lows", path), _get(table, "highs", path)
        weights = _get(table, "weights", path)
        dens = _wrap(path, BlockedDensity, lows, highs, weights)
        if dens.p != p:
            raise ConfigError(f"{path}.lows", f"boxes have dimension {dens.p}, process has p = {p}")
        return dens
    raise ConfigError(path, "give either `grid` (+ `weights`) or explicit `lows`, `highs`, `weights`")


def parse_transition(table: dict, masses: np.ndarray, path: str) -> np.ndarray:
    if "transition" in table:
        P = np.asarray(_get(table, "transition", path), dtype=np.float64)
        if P.shape != (len(masses), len(masses)):
            raise ConfigError(f"{path}.transition", f"expected a {len(masses)}x{len(masses)} matrix")
        return P
    if "stay" in table:
        stay = _get(table, "stay", path, kind=float)
        if not 0 <= stay < 1:
            raise ConfigError(f"{path}.stay", "must lie in [0, 1)")
        return stay * np.eye(len(masses)) + (1 - stay) * np.tile(masses, (len(masses), 1))
    raise ConfigError(path, "give `transition` or `stay`")


def parse_hidden(table: dict, density: BlockedDensity, path: str) -> HiddenChainSpec:
    P = parse_transition(table, density.masses, path)
    initial = table.get("initial", density.masses)
    hidden = _wrap(path, HiddenChainSpec, P, np.asarray(initial, dtype=np.float64))
    if np.max(np.abs(hidden.initial - density.masses)) > 1e-9:
        raise ConfigError(f"{path}.initial", "stationary law must equal the block masses")
    return hidden


def parse_process(table: dict, path: str = "process"):
    kind = _get(table, "kind", path, kind=str)
    p = _get(table, "p", path, 1 if kind == "delay_embedding" else 2, kind=int)
    if p < 1:
        raise ConfigError(f"{path}.p", "must be at least 1")
    if kind == "binomial":
        dens = table.get("density")
        density = parse_density(dens, p, f"{path}.density") if dens is not None else None
        return BinomialProcess(p, density)
    if kind == "blocked_chain":
        density = parse_density(_table(table, "density", path), p, f"{path}.density")
        hidden = parse_hidden(_table(table, "hidden", path), density, f"{path}.hidden")
        return BlockedChainProcess(density, hidden)
    if kind == "delay_embedding":
        density = parse_density(_table(table, "density", path), 1, f"{path}.density")
        hidden = parse_hidden(_table(table, "hidden", path), density, f"{path}.hidden")
        lags = _get(table, "lags", path)
        if not isinstance(lags, list) or any(not isinstance(l, int) for l in lags):
            raise ConfigError(f"{path}.lags", "expected a list of integers")
        if any(l <= 0 for l in lags) or any(b <= a for a, b in zip(lags, lags[1:])):
            raise ConfigError(f"{path}.lags", "lags must be positive and strictly increasing")
        return _wrap(path, DelayEmbeddingProcess, density, hidden, tuple(lags))
    if kind == "density_chain":
        chain = _table(table, "chain", path)
        cpath = f"{path}.chain"
        family = _get(chain, "family", cpath, "sine_product", kind=str)
        if family != "sine_product":
            raise ConfigError(f"{cpath}.family", "only `sine_product` is available")
        burn_in = chain.get("burn_in")
        spec = _wrap(cpath, DensityChainSpec.sine_product, _get(chain, "amplitude", cpath, 0.5, kind=float),
                     _get(chain, "order", cpath, 1, kind=int), p,
                     burn_in=None if burn_in is None else int(burn_in))
        return DensityChainProcess(spec, _get(chain, "oracle_grid", cpath, 8, kind=int))
    if kind == "lattice_field":
        if _get(table, "d", path, 2, kind=int) != 2:
            raise ConfigError(f"{path}.d", "lattice fields are supported for d = 2 only")
        density = parse_density(_table(table, "density", path), p, f"{path}.density")
        lat = _table(table, "lattice", path)
        lpath = f"{path}.lattice"
        a1 = parse_transition(_table(lat, "axis1", lpath), density.masses, f"{lpath}.axis1")
        a2 = parse_transition(_table(lat, "axis2", lpath), density.masses, f"{lpath}.axis2")
        min_ratio = _get(lat, "min_ratio", lpath, 0.5, kind=float)
        if "interior" in lat:
            spec = _wrap(lpath, LatticeFieldSpec, density, a1, a2, np.asarray(lat["interior"], dtype=float),
                         (1, 1), min_ratio)
        else:
            spec = _wrap(lpath, LatticeFieldSpec.mixture, density, a1, a2,
                         _get(lat, "weight", lpath, 0.5, kind=float), (1, 1), min_ratio)
        return LatticeFieldProcess(spec)
    raise ConfigError(f"{path}.kind", f"unknown process kind {kind!r}")


@dataclass(frozen=True)
class ComplexConfig:
    kind: ComplexKind = ComplexKind.RIPS
    max_dim: int = 2
    max_radius: float = math.inf
    metric: Metric = Metric.EUCLIDEAN
    budget: int = DEFAULT_BUDGET


def parse_complex(table: dict, path: str = "complex") -> ComplexConfig:
    try:
        kind = ComplexKind.parse(table.get("kind", "rips"))
    except ValueError as exc:
        raise ConfigError(f"{path}.kind", str(exc)) from None
    try:
        metric = Metric.parse(table.get("metric", "euclidean"))
    except ValueError as exc:
        raise ConfigError(f"{path}.metric", str(exc)) from None
    if kind is ComplexKind.CECH and metric is not Metric.EUCLIDEAN:
        raise ConfigError(f"{path}.metric", "Cech complexes need the Euclidean metric")
    max_dim = _get(table, "max_dim", path, 2, kind=int)
    max_radius = _get(table, "max_radius", path, math.inf, kind=float)
    budget = _get(table, "budget", path, DEFAULT_BUDGET, kind=int)
    if max_dim < 0:
        raise ConfigError(f"{path}.max_dim", "must be nonnegative")
    if max_radius < 0:
        raise ConfigError(f"{path}.max_radius", "must be nonnegative")
    if budget <= 0:
        raise ConfigError(f"{path}.budget", "must be positive")
    return ComplexConfig(kind, max_dim, max_radius, metric, budget)


def parse_queries(items, path: str = "queries") -> RectangleGrid:
    if items is None:
        return RectangleGrid(())
    if not isinstance(items, list):
        raise ConfigError(path, "expected an array of tables")
    out = []
    for i, item in enumerate(items):
        ipath = f"{path}[{i}]"
        if not isinstance(item, dict):
            raise ConfigError(ipath, "expected a table with q, r, s")
        q = _get(item, "q", ipath, kind=int)
        r = _get(item, "r", ipath, kind=float)
        s = _get(item, "s", ipath, kind=float)
        try:
            out.append(BettiQuery(q, r, s))
        except InvalidQueryError as exc:
            raise ConfigError(ipath, str(exc)) from None
    return RectangleGrid(tuple(out))


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict
    process: Any = None
    complex: ComplexConfig = field(default_factory=ComplexConfig)
    queries: RectangleGrid = field(default_factory=lambda: RectangleGrid(()))
    experiment: dict = field(default_factory=dict)
    sample: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return int(self.experiment.get("seed", self.sample.get("seed", 0)))

    @property
    def workers(self) -> int:
        return int(self.experiment.get("workers", 1))


def parse_experiment(table: dict, path: str = "experiment") -> dict:
    if not table:
        return {}
    out = dict(table)
    etype = _get(table, "type", path, "compare", kind=str)
    if etype not in EXPERIMENT_TYPES:
        raise ConfigError(f"{path}.type", f"unknown experiment type {etype!r}; one of {', '.join(EXPERIMENT_TYPES)}")
    out["type"] = etype
    if "n_grid" in table:
        n_grid = table["n_grid"]
        if not isinstance(n_grid, list) or not n_grid or any(not isinstance(n, int) or n < 1 for n in n_grid):
            raise ConfigError(f"{path}.n_grid", "expected a nonempty list of positive integers")
        if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
            raise ConfigError(f"{path}.n_grid", "must be strictly increasing")
    for key in ("replications", "workers", "trials", "n_max"):
        if key in table and _get(table, key, path, kind=int) < (0 if key == "trials" else 1):
            raise ConfigError(f"{path}.{key}", "must be positive")
    _get(table, "seed", path, 0, kind=int)
    return out


def parse_config(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("", "configuration must be a table")
    process = parse_process(data["process"]) if "process" in data else None
    cx = parse_complex(_table(data, "complex", "", required=False))
    queries = parse_queries(data.get("queries"))
    experiment = parse_experiment(_table(data, "experiment", "", required=False))
    sample = _table(data, "sample", "", required=False)
    if sample:
        if _get(sample, "n", "sample", kind=int) < 0:
            raise ConfigError("sample.n", "must be nonnegative")
        _get(sample, "seed", "sample", 0, kind=int)
    bounds = _table(data, "bounds", "", required=False)
    for i, query in enumerate(queries):
        top = max(cx.max_dim - 1, 0)
        if cx.kind is ComplexKind.CECH and process is not None:
            top = min(top, max(process.p - 1, 0))
        if query.q > top:
            raise ConfigError(f"queries[{i}].q", f"degree {query.q} exceeds the largest supported degree {top}")
    return ExperimentConfig(data, process, cx, queries, experiment, sample, bounds)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("", f"invalid TOML: {exc}") from None
    return parse_config(data)

"""Monte Carlo checks of the limit theorems for persistent Betti numbers.

Every check is relative: a dependent process is compared with the binomial
process sharing its marginal density, since the limits themselves have no
closed form.  All estimates use the critical scaling ``eta_n = n^(1/p)``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import __version__
from . import rng as _rng
from .coupling import (BoundParams, betti_exp_bound, exact_mixing_matrix, kernel_concentration_bound,
                       mcdiarmid_bound)
from .filtration import BudgetExceededError, ComplexKind, build_complex, rescale_complex
from .geometry import Metric, PointCloud, critical_scale
from .persistence import BettiQuery, geometric_lemma_gap, persistence_pairs, persistent_betti
from .samplers import BlockedDensity, HiddenChainSpec, sample_binomial

DEFAULT_BUDGET = 5_000_000
PASS, FLAG, FAIL = "pass", "flag", "fail"

# keys of the top-level stream path, kept apart from sampler substreams
_ESTIMATE, _SLLN, _LEMMA, _CONC, _KERNEL, _MCDIARMID = 11, 12, 13, 14, 15, 16


@dataclass(frozen=True)
class RectangleGrid:
    """Rectangles ``[0, r] x (s, inf]`` as a list of queries, each with ``r <= s``."""

    queries: tuple

    def __post_init__(self):
        qs = tuple(q if isinstance(q, BettiQuery) else BettiQuery(*q) for q in self.queries)
        object.__setattr__(self, "queries", qs)

    @classmethod
    def from_pairs(cls, q: int, pairs) -> "RectangleGrid":
        return cls(tuple(BettiQuery(q, r, s) for r, s in pairs))

    def __len__(self) -> int:
        return len(self.queries)

    def __iter__(self):
        return iter(self.queries)

    def __add__(self, other: "RectangleGrid") -> "RectangleGrid":
        return RectangleGrid(self.queries + other.queries)

    @property
    def max_s(self) -> float:
        return max((q.s for q in self.queries), default=0.0)

    @property
    def max_degree(self) -> int:
        return max((q.q for q in self.queries), default=0)


@dataclass(frozen=True)
class LimitEstimate:
    """Mean and standard error of ``beta_q^{r,s} / n`` for each ``n`` in ``n_grid``.

    ``values[k, j]`` is replication ``j`` at ``n_grid[k]``.
    """

    query: BettiQuery
    n_grid: tuple
    values: np.ndarray
    seed: int
    process_tag: str

    def __post_init__(self):
        if self.values.shape[1] < 2:
            raise ValueError("at least two replications are needed for standard errors")

    @property
    def replications(self) -> int:
        return self.values.shape[1]

    @property
    def estimates(self) -> np.ndarray:
        return self.values.mean(axis=1)

    @property
    def std_errors(self) -> np.ndarray:
        return self.values.std(axis=1, ddof=1) / math.sqrt(self.replications)


def describe(obj):
    """JSON-compatible description of a spec object, used for hashing and manifests."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        out = {"type": type(obj).__name__}
        for f in dataclasses.fields(obj):
            if f.name.startswith("_"):
                continue
            out[f.name] = describe(getattr(obj, f.name))
        return out
    if isinstance(obj, BlockedDensity):
        return obj.to_dict()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (list, tuple)):
        return [describe(x) for x in obj]
    if isinstance(obj, dict):
        return {str(k): describe(v) for k, v in obj.items()}
    if isinstance(obj, (ComplexKind, Metric)):
        return obj.value
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj
    return repr(obj)


def spec_hash(*objs) -> str:
    blob = json.dumps([describe(o) for o in objs], sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def provenance(seed: int, *objs) -> dict:
    return {"spec_hash": spec_hash(*objs), "seed": int(seed), "code_version": __version__}


# ---------------------------------------------------------------------------
# one replication


def betti_values(cloud, queries: Sequence[BettiQuery], kind, max_dim: int, metric=Metric.EUCLIDEAN,
                 eta: float | None = None, budget: int | None = DEFAULT_BUDGET) -> list[int]:
    """``beta_q^{r,s}`` of the filtration of ``eta * cloud`` for every query.

    The complex is built on the raw cloud up to ``max_s / eta`` and rescaled,
    which is combinatorially the same as building on the scaled cloud.
    """
    pts = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, dtype=np.float64)
    n, p = pts.shape
    eta = critical_scale(max(n, 1), p) if eta is None else eta
    max_s = max((q.s for q in queries), default=0.0)
    # a hair of slack so rounding in the rescale cannot drop a simplex at exactly s
    cx = build_complex(pts, kind, metric, max_dim, max_s / eta * (1 + 1e-9), budget)
    cx = rescale_complex(cx, eta)
    top = cx.max_homology_degree
    for q in queries:
        if q.q > top:
            raise ValueError(f"degree {q.q} needs max_dim >= {q.q + 1} (and q <= p - 1 for Cech)")
    diag = persistence_pairs(cx).diagram(top)
    return [persistent_betti(diag, q) for q in queries]


@dataclass(frozen=True)
class _Task:
    process: object
    n: int
    n_index: int
    rep: int
    seed: int
    queries: tuple
    kind: ComplexKind
    max_dim: int
    metric: Metric
    budget: Optional[int]


def replication_seed(master: int, tag: str, n_index: int, rep: int) -> int:
    return _rng.child_seed(master, _ESTIMATE, _rng.tag_id(tag), n_index, rep)


def _run_task(task: _Task) -> tuple[int, int, list[int]]:
    sample = task.process.sample(task.n, task.seed)
    try:
        vals = betti_values(sample.cloud, task.queries, task.kind, task.max_dim, task.metric, budget=task.budget)
    except BudgetExceededError as exc:
        raise BudgetExceededError(f"n={task.n}, replication={task.rep}: {exc}") from None
    return task.n_index, task.rep, vals


def run_tasks(tasks: Sequence[_Task], workers: int = 1) -> list:
    """Results in task order whatever the worker count."""
    if workers <= 1 or len(tasks) <= 1:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def estimate_limit(process, grid: RectangleGrid, n_grid: Sequence[int], R: int, kind="rips", seed: int = 0,
                   max_dim: int | None = None, metric=Metric.EUCLIDEAN, workers: int = 1,
                   budget: int | None = DEFAULT_BUDGET, min_replications: int = 10) -> list[LimitEstimate]:
    """Replicated estimates of ``n^-1 beta_q^{r,s}(K(n^(1/p) X_n))``, one per rectangle."""
    n_grid = tuple(int(n) for n in n_grid)
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])) or (n_grid and n_grid[0] < 1):
        raise ValueError("n_grid must be positive and increasing")
    if R < min_replications:
        raise ValueError(f"need at least {min_replications} replications")
    kind = ComplexKind.parse(kind)
    metric = Metric.parse(metric)
    if max_dim is None:
        max_dim = grid.max_degree + 1
    queries = tuple(grid)
    tasks = [_Task(process, n, k, j, replication_seed(seed, process.tag, k, j), queries, kind, max_dim, metric, budget)
             for k, n in enumerate(n_grid) for j in range(R)]
    values = np.zeros((len(queries), len(n_grid), R))
    for k, j, vals in run_tasks(tasks, workers):
        values[:, k, j] = np.asarray(vals, dtype=np.float64) / n_grid[k]
    return [LimitEstimate(q, n_grid, values[i], seed, process.tag) for i, q in enumerate(queries)]


# ---------------------------------------------------------------------------
# comparisons


def z_status(z: float, pass_below: float = 3.0, fail_at: float = 4.0) -> str:
    az = abs(z)
    if az < pass_below:
        return PASS
    return FLAG if az < fail_at else FAIL


def pooled_z(mean_a, se_a, mean_b, se_b) -> float:
    se = math.sqrt(se_a**2 + se_b**2)
    diff = mean_a - mean_b
    if se == 0:
        return 0.0 if diff == 0 else math.copysign(math.inf, diff)
    return diff / se


def compare_estimates(dependent: Sequence[LimitEstimate], oracle: Sequence[LimitEstimate],
                      max_flags: int = 1) -> dict:
    """Two-sample z per rectangle at the largest common ``n``.

    ``|z| < 3`` passes, ``3 <= |z| < 4`` is flagged and ``|z| >= 4`` fails;
    the overall status fails on any failure or on more than ``max_flags`` flags.
    """
    rows = []
    for a, b in zip(dependent, oracle):
        if a.query != b.query or a.n_grid[-1] != b.n_grid[-1]:
            raise ValueError("estimates must share rectangles and the largest n")
        ma, sa = float(a.estimates[-1]), float(a.std_errors[-1])
        mb, sb = float(b.estimates[-1]), float(b.std_errors[-1])
        z = pooled_z(ma, sa, mb, sb)
        rows.append({"q": a.query.q, "r": a.query.r, "s": a.query.s, "n": a.n_grid[-1],
                     "mean_dependent": ma, "se_dependent": sa, "mean_oracle": mb, "se_oracle": sb,
                     "z": z, "status": z_status(z)})
    n_fail = sum(r["status"] == FAIL for r in rows)
    n_flag = sum(r["status"] == FLAG for r in rows)
    status = FAIL if n_fail or n_flag > max_flags else (FLAG if n_flag else PASS)
    return {"status": status, "flags": n_flag, "failures": n_fail, "rectangles": rows}


def compare_with_value(estimate: LimitEstimate, value: float) -> dict:
    """One-sample z of the largest-``n`` estimate against a known value."""
    m, se = float(estimate.estimates[-1]), float(estimate.std_errors[-1])
    z = pooled_z(m, se, value, 0.0)
    return {"mean": m, "se": se, "target": value, "z": z, "status": z_status(z)}


def exponential_gap_density(r: float, n: int | None = None) -> float:
    """``n^-1 E beta_0^{r,r}`` for ``n`` uniform points on ``[0, 1]`` scaled by ``n``.

    Components are one plus the number of the ``n - 1`` spacings exceeding
    ``r / n``, each with probability ``(1 - r/n)^n``; the limit is ``e^-r``.
    """
    if n is None:
        return math.exp(-r)
    if r >= n:
        return 1.0 / n
    return (1.0 + (n - 1) * (1.0 - r / n) ** n) / n


def exponential_gap_simulation(r: float, n: int, R: int, seed: int = 0) -> np.ndarray:
    """Simulated ``n^-1 beta_0^{r,r}`` from exponential spacings (Poisson limit oracle)."""
    gaps = _rng.stream(seed, 0).exponential(1.0, size=(R, n - 1))
    return (1.0 + np.count_nonzero(gaps > r, axis=1)) / n


# ---------------------------------------------------------------------------
# single-path and rectangle-wise convergence


def slln_check(process, query: BettiQuery, n_grid: Sequence[int], seed: int = 0, kind="rips",
               max_dim: int | None = None, metric=Metric.EUCLIDEAN, budget: int | None = DEFAULT_BUDGET) -> dict:
    """``n^-1 beta`` along prefixes of one long sample.

    The diagnostic is the spread (max - min) over the last three grid points,
    also reported relative to their mean.
    """
    n_grid = tuple(int(n) for n in n_grid)
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError("n_grid must be increasing")
    if max_dim is None:
        max_dim = query.q + 1
    path_seed = _rng.child_seed(seed, _SLLN, _rng.tag_id(process.tag))
    sample = process.sample(n_grid[-1], path_seed)
    traj = []
    for n in n_grid:
        (b,) = betti_values(sample.cloud.prefix(n), (query,), kind, max_dim, metric, budget=budget)
        traj.append(b / n)
    tail = np.asarray(traj[-3:])
    spread = float(tail.max() - tail.min())
    mean = float(tail.mean())
    return {"n_grid": list(n_grid), "trajectory": traj, "spread": spread,
            "relative_spread": spread / mean if mean > 0 else 0.0, **provenance(seed, process, query)}


def vague_convergence_check(process, grid: RectangleGrid, n_grid: Sequence[int], R: int, seed: int = 0,
                            kind="rips", max_dim: int | None = None, metric=Metric.EUCLIDEAN, workers: int = 1,
                            budget: int | None = DEFAULT_BUDGET) -> list[dict]:
    """Per-rectangle estimates over ``n_grid`` with a Cauchy flag on the top two ``n``."""
    if len(grid) == 0:
        return []
    if len(n_grid) < 2:
        raise ValueError("need at least two sample sizes")
    ests = estimate_limit(process, grid, n_grid, R, kind, seed, max_dim, metric, workers, budget)
    table = []
    for e in ests:
        m, se = e.estimates, e.std_errors
        z = pooled_z(m[-1], se[-1], m[-2], se[-2])
        table.append({"q": e.query.q, "r": e.query.r, "s": e.query.s, "n_grid": list(e.n_grid),
                      "estimates": m.tolist(), "std_errors": se.tolist(), "z_last_two": z,
                      "cauchy": abs(z) < 3.0})
    return table


# ---------------------------------------------------------------------------
# geometric lemma


def geometric_lemma_suite(n_max: int = 12, trials: int = 500, seed: int = 0, p: int = 2,
                          kinds=("rips", "cech"), degrees=(0, 1)) -> dict:
    """Randomized check of the exchange inequality on nested clouds (hard assertion)."""
    if n_max > 12:
        raise ValueError("the suite is meant for exhaustive-scale clouds, n_max <= 12")
    gen = _rng.stream(seed, _LEMMA)
    violations, checked = [], 0
    for trial in range(trials):
        kind = ComplexKind.parse(kinds[trial % len(kinds)])
        q = int(degrees[(trial // len(kinds)) % len(degrees)])
        n_y = int(gen.integers(1, n_max + 1))
        n_x = int(gen.integers(0, n_y + 1))
        pts = gen.random((n_y, p))
        inj = np.sort(gen.choice(n_y, size=n_x, replace=False))
        r, s = np.sort(gen.random(2) * 0.8)
        query = BettiQuery(q, float(r), float(s))
        cap = q + 1 if kind is ComplexKind.RIPS else min(q + 1, p)
        y = build_complex(pts, kind, max_dim=cap, max_radius=s)
        x = build_complex(pts[inj] if n_x else np.zeros((0, p)), kind, max_dim=cap, max_radius=s)
        lhs, rhs = geometric_lemma_gap(x, y, query, inj)
        checked += 1
        if lhs > rhs:
            violations.append({"trial": trial, "kind": kind.value, "q": q, "lhs": lhs, "rhs": rhs})
    return {"status": PASS if not violations else FAIL, "trials": checked, "violations": violations,
            **provenance(seed, {"n_max": n_max, "p": p, "kinds": list(kinds), "degrees": list(degrees)})}


# ---------------------------------------------------------------------------
# concentration


def concentration_suite(process, query: BettiQuery, n: int, R: int, seed: int = 0, a: float = 0.75,
                        t_grid: Sequence[float] = (0.05, 0.1, 0.2, 0.5), kind="rips", max_dim: int | None = None,
                        f_star: float = 1.0, gamma_inf: float = 1.0, n_compare: int | None = None,
                        workers: int = 1, budget: int | None = DEFAULT_BUDGET, min_replications: int = 1000) -> dict:
    """Empirical tails of ``|beta - E beta| >= n^a t`` against the evaluated bound.

    ``E beta`` is replaced by the replication mean.  Comparisons where the
    bound is at least 1 are marked vacuous.  With ``n_compare`` the standard
    deviation of ``n^-1 beta`` is also computed at that size and the decay
    ratio reported (not asserted).
    """
    grid = RectangleGrid((query,))
    est = estimate_limit(process, grid, (n,), R, kind, seed, max_dim, Metric.EUCLIDEAN, workers, budget,
                         min_replications=min_replications)[0]
    beta = est.values[0] * n
    dev = np.abs(beta - beta.mean())
    rows = []
    for t in t_grid:
        emp = float(np.mean(dev >= n**a * t))
        bound = betti_exp_bound(BoundParams(n=n, t=t, a=a, q=query.q, radius=query.s, f_star=f_star,
                                            gamma_inf=gamma_inf, p=process.p))
        rows.append({"t": t, "empirical": emp, "bound": bound.value, "vacuous": bound.trivial,
                     "violated": (not bound.trivial) and emp > bound.value})
    report = {"n": n, "replications": R, "a": a, "rows": rows,
              "all_vacuous": all(r["vacuous"] for r in rows),
              "status": FAIL if any(r["violated"] for r in rows) else PASS,
              "std": float(np.std(beta / n, ddof=1)), **provenance(seed, process, query)}
    if n_compare is not None:
        other = estimate_limit(process, grid, (n_compare,), R, kind, seed + 1, max_dim, Metric.EUCLIDEAN, workers,
                               budget, min_replications=min_replications)[0]
        other_std = float(np.std(other.values[0], ddof=1))
        report["std_compare"] = other_std
        report["std_ratio"] = other_std / report["std"] if report["std"] > 0 else math.nan
    return report


def _ball_hits(points: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    return np.sum((points - center) ** 2, axis=-1) <= radius * radius


def kernel_tail_experiment(n: int, R: int, seed: int = 0, t_grid=(4, 6, 8), process=None,
                           f_star: float = 1.0) -> dict:
    """Visits to a ball ``B_n`` with ``n mu(B_n) = 1`` vs ``exp(-t + (e - 1) f* n mu(B_n))``.

    Without ``process`` the points are i.i.d. uniform on ``[0, 1]^2``;
    otherwise ``process.sample`` supplies the points and ``f_star`` must bound
    its conditional densities.
    """
    radius = math.sqrt(1.0 / (math.pi * n))
    center = np.array([0.5, 0.5])
    counts = np.empty(R, dtype=np.int64)
    for j in range(R):
        s = _rng.child_seed(seed, _KERNEL, j)
        cloud = process.sample(n, s).cloud if process is not None else sample_binomial(n, None, s, p=2).cloud
        counts[j] = int(np.count_nonzero(_ball_hits(cloud.points, center, radius)))
    mu = math.pi * radius**2
    rows = []
    for t in t_grid:
        emp = float(np.mean(counts > t))
        bound = kernel_concentration_bound(n, t, f_star, mu).value
        rows.append({"t": t, "empirical": emp, "bound": bound, "violated": emp > bound})
    return {"rows": rows, "status": FAIL if any(r["violated"] for r in rows) else PASS,
            "mean_count": float(counts.mean())}


def mcdiarmid_experiment(hidden: HiddenChainSpec, n: int, R: int, seed: int = 0, state: int = 1) -> dict:
    """``phi = #{i : Z_i = state}`` along a stationary chain vs the mixing-matrix McDiarmid bound.

    Thresholds are the empirical 1, 2 and 3 standard deviations.
    """
    from .samplers import hidden_chain_path

    gen = _rng.stream(seed, _MCDIARMID)
    phi = np.empty(R)
    for j in range(R):
        phi[j] = np.count_nonzero(hidden_chain_path(hidden, gen.random(n)) == state)
    G = exact_mixing_matrix(hidden, n)
    dev = np.abs(phi - phi.mean())
    sd = float(phi.std(ddof=1))
    rows = []
    for k in (1, 2, 3):
        t = k * sd
        emp = float(np.mean(dev >= t))
        bound = mcdiarmid_bound(G, np.ones(n), t).value
        rows.append({"t": t, "sigmas": k, "empirical": emp, "bound": bound, "violated": emp > bound})
    return {"rows": rows, "gamma_inf": G.gamma_inf,
            "status": FAIL if any(r["violated"] for r in rows) else PASS}


def blocked_chain_f_star(density: BlockedDensity, hidden: HiddenChainSpec) -> float:
    """Bound on the one-step conditional density ``P(i, j) / |A_j|`` and the marginal ``alpha_j``."""
    return float(max((hidden.transition / density.volumes[None, :]).max(), density.weights.max()))

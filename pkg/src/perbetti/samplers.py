"""Stationary processes on ``[0, 1]^p``: binomial processes, hidden-chain
processes with blocked densities, finite-order density chains, delay
embeddings and lattice random fields.

All samplers are deterministic functions of ``(spec, seed)``; see
:mod:`perbetti.rng` for the stream layout.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from . import rng as _rng
from .geometry import PointCloud


class SpecError(ValueError):
    """Invalid process specification; ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class EnvelopeError(RuntimeError):
    pass


class UnsupportedDimensionError(ValueError):
    pass


# ---------------------------------------------------------------------------
# blocked densities


class BlockedDensity:
    """Piecewise-constant density ``kappa = sum_i alpha_i 1{A_i}`` on a box partition."""

    def __init__(self, lows, highs, weights, tol: float = 1e-9):
        lows = np.array(lows, dtype=np.float64, ndmin=2)
        highs = np.array(highs, dtype=np.float64, ndmin=2)
        weights = np.array(weights, dtype=np.float64, ndmin=1)
        if lows.shape != highs.shape or lows.shape[0] != weights.shape[0]:
            raise SpecError("blocks", "need one (low, high) box per weight")
        if np.any(lows < 0) or np.any(highs > 1) or np.any(highs <= lows):
            raise SpecError("blocks", "boxes must be nondegenerate and inside [0, 1]^p")
        if np.any(weights <= 0):
            raise SpecError("weights", "block weights must be positive")
        vols = np.prod(highs - lows, axis=1)
        if abs(vols.sum() - 1.0) > tol:
            raise SpecError("blocks", f"block volumes sum to {vols.sum():.12g}, not 1")
        for i, j in itertools.combinations(range(len(vols)), 2):
            overlap = np.prod(np.clip(np.minimum(highs[i], highs[j]) - np.maximum(lows[i], lows[j]), 0, None))
            if overlap > tol:
                raise SpecError("blocks", f"blocks {i} and {j} overlap")
        mass = float(weights @ vols)
        if abs(mass - 1.0) > tol:
            raise SpecError("weights", f"sum of weight * volume is {mass:.12g}, not 1")
        self.lows, self.highs, self.weights, self.volumes = lows, highs, weights, vols
        for a in (lows, highs, weights, vols):
            a.setflags(write=False)

    @classmethod
    def grid(cls, m: int, p: int, weights=None) -> "BlockedDensity":
        """Regular ``m^p`` grid; ``weights`` in C order of the cell multi-index."""
        cells = np.array(list(itertools.product(range(m), repeat=p)), dtype=np.float64).reshape(-1, p)
        if weights is None:
            weights = np.ones(len(cells))
        return cls(cells / m, (cells + 1) / m, weights)

    @classmethod
    def uniform(cls, p: int) -> "BlockedDensity":
        return cls.grid(1, p)

    @property
    def p(self) -> int:
        return self.lows.shape[1]

    @property
    def n_blocks(self) -> int:
        return len(self.weights)

    @property
    def masses(self) -> np.ndarray:
        """Block probabilities ``alpha_i |A_i|``."""
        return self.weights * self.volumes

    def block_of(self, points) -> np.ndarray:
        """Index of the block containing each point (boxes are closed at 1, else half-open)."""
        x = np.asarray(points, dtype=np.float64).reshape(-1, self.p)
        out = np.full(len(x), -1, dtype=np.int64)
        for i in range(self.n_blocks):
            lo, hi = self.lows[i], self.highs[i]
            inside = np.all((x >= lo) & ((x < hi) | ((hi == 1.0) & (x == 1.0))), axis=1)
            out[(out < 0) & inside] = i
        return out

    def evaluate(self, points) -> np.ndarray:
        idx = self.block_of(points)
        return np.where(idx >= 0, self.weights[np.maximum(idx, 0)], 0.0)

    def place(self, blocks: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
        """Map ``uniforms`` in ``[0, 1)^p`` to uniform positions in the given blocks."""
        lo, hi = self.lows[blocks], self.highs[blocks]
        return np.clip(lo + (hi - lo) * uniforms, 0.0, 1.0)

    def to_dict(self) -> dict:
        return {"lows": self.lows.tolist(), "highs": self.highs.tolist(), "weights": self.weights.tolist()}


def _check_stochastic(matrix: np.ndarray, name: str, tol: float = 1e-12) -> None:
    if np.any(matrix < 0) or not np.all(np.isfinite(matrix)):
        raise SpecError(name, "entries must be finite and nonnegative")
    if np.any(np.abs(matrix.sum(axis=-1) - 1.0) > tol):
        raise SpecError(name, "rows must sum to 1")


@dataclass(frozen=True)
class HiddenChainSpec:
    """Stationary finite-state chain selecting blocks."""

    transition: np.ndarray
    initial: np.ndarray

    def __post_init__(self):
        P = np.array(self.transition, dtype=np.float64)
        pi = np.array(self.initial, dtype=np.float64)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise SpecError("transition", "must be a square matrix")
        if pi.shape != (P.shape[0],):
            raise SpecError("initial", "length must match the number of states")
        _check_stochastic(P, "transition")
        if np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-12:
            raise SpecError("initial", "must be a probability vector")
        if np.max(np.abs(pi @ P - pi)) > 1e-9:
            raise SpecError("initial", "initial distribution is not stationary for the transition matrix")
        P.setflags(write=False)
        pi.setflags(write=False)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "initial", pi)

    @classmethod
    def for_density(cls, density: BlockedDensity, transition) -> "HiddenChainSpec":
        return cls(np.asarray(transition, dtype=np.float64), density.masses)

    @classmethod
    def independent(cls, initial) -> "HiddenChainSpec":
        pi = np.asarray(initial, dtype=np.float64)
        return cls(np.tile(pi, (len(pi), 1)), pi)

    @classmethod
    def lazy(cls, initial, stay: float) -> "HiddenChainSpec":
        """``stay * I + (1 - stay) * 1 pi^T``: reversible, stationary for ``initial``."""
        pi = np.asarray(initial, dtype=np.float64)
        P = stay * np.eye(len(pi)) + (1.0 - stay) * np.tile(pi, (len(pi), 1))
        return cls(P, pi)

    @property
    def n_states(self) -> int:
        return len(self.initial)


@dataclass(frozen=True)
class Sample:
    cloud: PointCloud
    hidden_path: Optional[np.ndarray]
    seed: int
    process_tag: str
    sites: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.cloud)


def _cumulative(rows: np.ndarray) -> np.ndarray:
    cum = np.cumsum(rows, axis=-1)
    cum[..., -1] = 1.0
    return cum


def _draw(cum_row: np.ndarray, u: float) -> int:
    # consumes only the current block's cumulative row and one uniform
    return int(np.searchsorted(cum_row, u, side="right"))


def sample_binomial(n: int, density: BlockedDensity | int | None = None, seed=0, p: int | None = None) -> Sample:
    """``n`` i.i.d. points with density ``density`` (uniform when ``None``)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if isinstance(density, int):
        density, p = None, density
    if density is None:
        if p is None:
            raise ValueError("give a density or the dimension p")
        pts = _rng.stream(seed, _rng.COORDS).random((n, p))
        return Sample(PointCloud(pts, dim_p=p), None, seed, "binomial-uniform")
    blocks = np.searchsorted(_cumulative(density.masses), _rng.stream(seed, _rng.HIDDEN).random(n), side="right")
    pts = density.place(blocks, _rng.stream(seed, _rng.COORDS).random((n, density.p)))
    return Sample(PointCloud(pts, dim_p=density.p), blocks.astype(np.int64), seed, "binomial-blocked")


def hidden_chain_path(hidden: HiddenChainSpec, uniforms: np.ndarray) -> np.ndarray:
    """Stationary path driven by the given uniforms (one per step)."""
    cum = _cumulative(hidden.transition)
    path = np.empty(len(uniforms), dtype=np.int64)
    if len(uniforms) == 0:
        return path
    state = _draw(_cumulative(hidden.initial), uniforms[0])
    path[0] = state
    for t in range(1, len(uniforms)):
        state = _draw(cum[state], uniforms[t])
        path[t] = state
    return path


def sample_blocked_chain(n: int, density: BlockedDensity, hidden: HiddenChainSpec, seed=0,
                         coord_seed=None) -> Sample:
    """Hidden block path from the chain, then a uniform point in each chosen block.

    ``coord_seed`` overrides the seed of the within-block coordinates only;
    the hidden path is unaffected by it.
    """
    if hidden.n_states != density.n_blocks:
        raise SpecError("hidden", "number of hidden states must equal the number of blocks")
    if np.max(np.abs(hidden.initial - density.masses)) > 1e-9:
        raise SpecError("hidden.initial", "stationary law must equal the block masses alpha_i |A_i|")
    path = hidden_chain_path(hidden, _rng.stream(seed, _rng.HIDDEN).random(n))
    cseed = seed if coord_seed is None else coord_seed
    pts = density.place(path, _rng.stream(cseed, _rng.COORDS).random((n, density.p)))
    return Sample(PointCloud(pts, dim_p=density.p), path, seed, "blocked-chain")


# ---------------------------------------------------------------------------
# finite-order chains given by a joint density


class SineProductDensity:
    """``g(z) = 1 + a * prod sin(2 pi z_k)`` over all coordinates of ``(m+1)`` points.

    Every lower-dimensional marginal is uniform, so the chain is stationary
    with uniform marginal.
    """

    def __init__(self, amplitude: float = 0.5):
        if not abs(amplitude) < 1:
            raise SpecError("amplitude", "must lie in (-1, 1) for a strictly positive density")
        self.amplitude = float(amplitude)

    def __call__(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        prod = np.prod(np.sin(2.0 * np.pi * z), axis=(-2, -1))
        return 1.0 + self.amplitude * prod

    @property
    def bounds(self) -> tuple[float, float]:
        return 1.0 - abs(self.amplitude), 1.0 + abs(self.amplitude)

    def __repr__(self) -> str:
        return f"SineProductDensity({self.amplitude})"


class ConstantDensity:
    def __call__(self, z):
        z = np.asarray(z)
        return np.ones(z.shape[:-2])

    bounds = (1.0, 1.0)

    def __repr__(self) -> str:
        return "ConstantDensity()"


def _midpoints(k: int) -> np.ndarray:
    return (np.arange(k) + 0.5) / k


@dataclass(frozen=True)
class DensityChainSpec:
    """Order-``m`` Markov chain on ``[0, 1]^p`` given by the joint density ``g``
    of ``m + 1`` consecutive points; ``g`` takes arrays of shape ``(..., m+1, p)``."""

    order: int
    p: int
    g: Callable
    g_min: float
    g_max: float
    burn_in: Optional[int] = None
    quad_points: int = 48
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.order < 1 or self.p < 1:
            raise SpecError("order", "order and dimension must be positive")
        if not (0 < self.g_min <= self.g_max < math.inf):
            raise SpecError("g_min", "need 0 < g_min <= g_max < inf")
        if self.burn_in is not None and self.burn_in < 0:
            raise SpecError("burn_in", "must be nonnegative")

    @classmethod
    def sine_product(cls, amplitude: float = 0.5, order: int = 1, p: int = 1, **kw) -> "DensityChainSpec":
        g = SineProductDensity(amplitude)
        lo, hi = g.bounds
        return cls(order, p, g, lo, hi, **kw)

    @property
    def default_burn_in(self) -> int:
        return 10 * self.order * math.ceil(self.g_max / self.g_min)

    def _grid(self, dims: int) -> np.ndarray:
        k = self.quad_points
        axes = [_midpoints(k)] * dims
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dims)

    def marginal(self, x) -> np.ndarray:
        """Marginal density of one point, by midpoint quadrature over the other ``m`` points."""
        x = np.asarray(x, dtype=np.float64).reshape(-1, self.p)
        rest = self._grid(self.order * self.p).reshape(-1, self.order, self.p)
        out = np.empty(len(x))
        for i, xi in enumerate(x):
            z = np.concatenate([np.broadcast_to(xi, (len(rest), 1, self.p)), rest], axis=1)
            out[i] = float(np.mean(self.g(z)))
        return out

    def conditional(self, past, x) -> np.ndarray:
        """``f(x | past)``; ``past`` has shape ``(m, p)``, normalized by quadrature."""
        past = np.asarray(past, dtype=np.float64).reshape(self.order, self.p)
        x = np.asarray(x, dtype=np.float64).reshape(-1, self.p)
        key = ("norm", past.tobytes())
        if key not in self._cache:
            grid = self._grid(self.p)
            z = np.concatenate([np.broadcast_to(past, (len(grid), self.order, self.p)), grid[:, None, :]], axis=1)
            self._cache[key] = float(np.mean(self.g(z)))
        z = np.concatenate([np.broadcast_to(past, (len(x), self.order, self.p)), x[:, None, :]], axis=1)
        return self.g(z) / self._cache[key]

    def blocked_marginal(self, m: int) -> BlockedDensity:
        """Blocked approximation of the marginal on the regular ``m^p`` grid."""
        key = ("blocked", m)
        if key not in self._cache:
            cells = np.array(list(itertools.product(range(m), repeat=self.p)), dtype=np.float64)
            centers = (cells + 0.5) / m
            w = self.marginal(centers)
            w = w / (w.sum() / m**self.p)
            self._cache[key] = BlockedDensity(cells / m, (cells + 1) / m, w)
        return self._cache[key]

    def spot_check(self, rng: np.random.Generator, size: int = 2000) -> None:
        z = rng.random((size, self.order + 1, self.p))
        vals = self.g(z)
        if np.any(vals < self.g_min * (1 - 1e-12)) or np.any(vals > self.g_max * (1 + 1e-12)):
            raise SpecError("g", "density leaves the declared [g_min, g_max] range")


def sample_density_chain(n: int, spec: DensityChainSpec, seed=0, burn_in: int | None = None) -> Sample:
    """Rejection sampling from ``x -> g(past, x)`` with the constant envelope ``g_max``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if spec.g_min / spec.g_max < 1e-4:
        raise EnvelopeError(f"envelope ratio g_min/g_max = {spec.g_min / spec.g_max:.3g} is below 1e-4")
    m, p = spec.order, spec.p
    if burn_in is None:
        burn_in = spec.burn_in if spec.burn_in is not None else spec.default_burn_in
    init = _rng.stream(seed, _rng.INITIAL).random((m, p))
    prop = _rng.stream(seed, _rng.PROPOSALS)
    batch = int(min(64, max(1, math.ceil(spec.g_max / spec.g_min))))
    window = init.copy()
    out = np.empty((n, p))
    proposed = accepted = 0
    for t in range(burn_in + n):
        while True:
            cand = prop.random((batch, p))
            u = prop.random(batch)
            z = np.concatenate([np.broadcast_to(window, (batch, m, p)), cand[:, None, :]], axis=1)
            ok = np.flatnonzero(u * spec.g_max < spec.g(z))
            if ok.size:
                proposed += int(ok[0]) + 1
                accepted += 1
                x = cand[ok[0]]
                break
            proposed += batch
            if proposed >= 10_000 and accepted / proposed < 1e-4:
                raise EnvelopeError(f"acceptance rate {accepted / proposed:.2e} after {proposed} proposals")
        window = np.concatenate([window[1:], x[None, :]], axis=0)
        if t >= burn_in:
            out[t - burn_in] = x
    return Sample(PointCloud(out, dim_p=p), None, seed, "density-chain")


# ---------------------------------------------------------------------------
# delay embeddings


def delay_embed(series, lags: Sequence[int] = ()) -> PointCloud:
    """Rows ``(z_t, z_{t - lag_1}, ..., z_{t - lag_{m-1}})`` for every valid ``t``."""
    z = np.asarray(series, dtype=np.float64).reshape(-1)
    lags = tuple(int(l) for l in lags)
    if any(l <= 0 for l in lags) or any(b <= a for a, b in zip(lags, lags[1:])):
        raise ValueError("lags must be positive and strictly increasing")
    tau = lags[-1] if lags else 0
    if len(z) <= tau:
        raise ValueError("series is too short for the largest lag")
    t = np.arange(tau, len(z))
    cols = [z[t]] + [z[t - l] for l in lags]
    return PointCloud(np.stack(cols, axis=1), dim_p=len(cols))


# ---------------------------------------------------------------------------
# lattice fields


def order_key(u: Sequence[int]) -> tuple:
    """Sort key realizing ``>_d``: cumulative l1 prefixes compared from the last one down."""
    return tuple(reversed(np.cumsum(np.abs(np.asarray(u, dtype=np.int64))).tolist()))


def total_order(u: Sequence[int], v: Sequence[int]) -> int:
    """-1, 0 or 1 according to ``u <_d v``, ``u = v``, ``u >_d v``."""
    if len(u) != len(v):
        raise ValueError("lattice points must have the same dimension")
    su = np.cumsum(np.abs(np.asarray(u, dtype=np.int64)))
    sv = np.cumsum(np.abs(np.asarray(v, dtype=np.int64)))
    for j in range(len(u) - 1, -1, -1):
        if su[j] != sv[j]:
            return 1 if su[j] > sv[j] else -1
    return 0


def total_order_2d(u, v) -> int:
    if len(u) != 2 or len(v) != 2:
        raise UnsupportedDimensionError("total_order_2d expects points of Z^2")
    return total_order(u, v)


def lattice_sites(extent: Sequence[int]) -> np.ndarray:
    """Sites ``1 <= u <= extent`` in increasing ``>_d`` order, shape ``(pi(N), d)``."""
    sites = list(itertools.product(*[range(1, k + 1) for k in extent]))
    sites.sort(key=order_key)
    return np.array(sites, dtype=np.int64).reshape(-1, len(extent))


@dataclass(frozen=True)
class LatticeFieldSpec:
    """Blocked Markov field on ``{1..N1} x {1..N2}``.

    ``axis1[a]``: law of the block at ``(i, 1)`` given ``a`` at ``(i-1, 1)``;
    ``axis2[b]``: law at ``(1, j)`` given ``b`` at ``(1, j-1)``;
    ``interior[a, b]``: law at ``(i, j)`` given ``a`` at ``(i-1, j)`` and ``b``
    at ``(i, j-1)``.  The corner is drawn from the block masses.
    """

    density: BlockedDensity
    axis1: np.ndarray
    axis2: np.ndarray
    interior: np.ndarray
    extent: tuple = (1, 1)
    min_ratio: float = 0.5

    def __post_init__(self):
        K = self.density.n_blocks
        pi = self.density.masses
        mats = {}
        for name, shape in (("axis1", (K, K)), ("axis2", (K, K)), ("interior", (K, K, K))):
            a = np.array(getattr(self, name), dtype=np.float64)
            if a.shape != shape:
                raise SpecError(name, f"expected shape {shape}, got {a.shape}")
            _check_stochastic(a, name)
            a.setflags(write=False)
            mats[name] = a
            object.__setattr__(self, name, a)
        for name in ("axis1", "axis2"):
            if np.max(np.abs(pi @ mats[name] - pi)) > 1e-9:
                raise SpecError(name, "block masses are not stationary for this transition")
        T = mats["interior"]
        # additive in the two neighbours, so the site marginal depends only on neighbour marginals
        additive = T - T[:, :1, :] - T[:1, :, :] + T[:1, :1, :]
        if np.max(np.abs(additive)) > 1e-9:
            raise SpecError("interior", "interior kernel must be additive in its two neighbours")
        site_law = pi @ T[:, 0, :] + pi @ T[0, :, :] - T[0, 0, :]
        if np.max(np.abs(site_law - pi)) > 1e-9:
            raise SpecError("interior", "block masses are not preserved by the interior kernel")
        extent = tuple(int(k) for k in self.extent)
        object.__setattr__(self, "extent", extent)
        if any(k < 1 for k in extent):
            raise SpecError("extent", "extent entries must be positive")
        if not 0 < self.min_ratio <= 1:
            raise SpecError("min_ratio", "must lie in (0, 1]")
        if min(extent) / max(extent) < self.min_ratio:
            raise SpecError("extent", f"min/max side ratio below {self.min_ratio}")

    @classmethod
    def mixture(cls, density: BlockedDensity, axis1, axis2, weight: float, extent=(1, 1),
                min_ratio: float = 0.5) -> "LatticeFieldSpec":
        """Interior law ``weight * axis1[a] + (1 - weight) * axis2[b]``."""
        A1 = np.asarray(axis1, dtype=np.float64)
        A2 = np.asarray(axis2, dtype=np.float64)
        T = weight * A1[:, None, :] + (1.0 - weight) * A2[None, :, :]
        return cls(density, A1, A2, T, extent, min_ratio)

    @classmethod
    def independent(cls, density: BlockedDensity, extent=(1, 1), min_ratio: float = 0.5) -> "LatticeFieldSpec":
        K = density.n_blocks
        pi = density.masses
        A = np.tile(pi, (K, 1))
        return cls(density, A, A, np.broadcast_to(pi, (K, K, K)).copy(), extent, min_ratio)

    @property
    def d(self) -> int:
        return len(self.extent)

    @property
    def size(self) -> int:
        return int(np.prod(self.extent))


def lattice_block_path(spec: LatticeFieldSpec, sites: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    c1, c2 = _cumulative(spec.axis1), _cumulative(spec.axis2)
    ci = _cumulative(spec.interior)
    c0 = _cumulative(spec.density.masses)
    N1, N2 = spec.extent
    state = np.full((N1 + 1, N2 + 1), -1, dtype=np.int64)
    path = np.empty(len(sites), dtype=np.int64)
    for k, ((i, j), u) in enumerate(zip(sites.tolist(), uniforms.tolist())):
        if i == 1 and j == 1:
            z = _draw(c0, u)
        elif j == 1:
            z = _draw(c1[state[i - 1, 1]], u)
        elif i == 1:
            z = _draw(c2[state[1, j - 1]], u)
        else:
            z = _draw(ci[state[i - 1, j], state[i, j - 1]], u)
        state[i, j] = z
        path[k] = z
    return path


def sample_lattice_field(spec: LatticeFieldSpec, seed=0) -> Sample:
    """Simulate the field site by site in ``>_d`` order.

    Points are returned in visiting order; ``Sample.sites`` holds the lattice
    coordinates of each point.
    """
    if spec.d != 2:
        raise UnsupportedDimensionError(f"lattice fields are supported for d = 2 only, got d = {spec.d}")
    sites = lattice_sites(spec.extent)
    path = lattice_block_path(spec, sites, _rng.stream(seed, _rng.HIDDEN).random(len(sites)))
    pts = spec.density.place(path, _rng.stream(seed, _rng.COORDS).random((len(sites), spec.density.p)))
    return Sample(PointCloud(pts, dim_p=spec.density.p), path, seed, "lattice-field", sites)


# ---------------------------------------------------------------------------
# process specifications


@dataclass(frozen=True)
class BinomialProcess:
    p: int
    density: Optional[BlockedDensity] = None
    tag: str = "binomial"

    def sample(self, n: int, seed) -> Sample:
        return sample_binomial(n, self.density, seed, p=self.p)

    def matched_binomial(self) -> "BinomialProcess":
        return self


@dataclass(frozen=True)
class BlockedChainProcess:
    density: BlockedDensity
    hidden: HiddenChainSpec
    tag: str = "blocked_chain"

    @property
    def p(self) -> int:
        return self.density.p

    def sample(self, n: int, seed) -> Sample:
        return sample_blocked_chain(n, self.density, self.hidden, seed)

    def matched_binomial(self) -> BinomialProcess:
        return BinomialProcess(self.p, self.density, tag="binomial_matched")


@dataclass(frozen=True)
class DensityChainProcess:
    spec: DensityChainSpec
    oracle_grid: int = 8
    tag: str = "density_chain"

    @property
    def p(self) -> int:
        return self.spec.p

    def sample(self, n: int, seed) -> Sample:
        return sample_density_chain(n, self.spec, seed)

    def matched_binomial(self) -> BinomialProcess:
        return BinomialProcess(self.p, self.spec.blocked_marginal(self.oracle_grid), tag="binomial_matched")


@dataclass(frozen=True)
class DelayEmbeddingProcess:
    """Delay embedding of a one-dimensional blocked hidden-chain series."""

    density: BlockedDensity
    hidden: HiddenChainSpec
    lags: tuple
    tag: str = "delay_embedding"

    def __post_init__(self):
        if self.density.p != 1:
            raise SpecError("density", "delay embeddings take a one-dimensional series")
        object.__setattr__(self, "lags", tuple(int(l) for l in self.lags))

    @property
    def p(self) -> int:
        return len(self.lags) + 1

    def sample(self, n: int, seed) -> Sample:
        tau = self.lags[-1] if self.lags else 0
        base = sample_blocked_chain(n + tau, self.density, self.hidden, seed)
        cloud = delay_embed(base.cloud.points[:, 0], self.lags)
        return Sample(cloud, base.hidden_path, seed, "delay-embedding")

    def embedded_density(self) -> BlockedDensity:
        """Exact blocked law of one embedded point ``(Z_t, Z_{t-lag_1}, ...)``."""
        lags = (0,) + self.lags
        P = self.hidden.transition
        pi = self.hidden.initial
        K = len(pi)
        if K ** len(lags) > 4096:
            raise SpecError("lags", "too many block combinations for an exact embedded density")
        # walk from the oldest coordinate forward in time
        steps = [lags[k + 1] - lags[k] for k in range(len(lags) - 1)]
        lows, highs, weights = [], [], []
        for combo in itertools.product(range(K), repeat=len(lags)):
            prob = pi[combo[-1]]
            for k in range(len(lags) - 2, -1, -1):
                prob *= np.linalg.matrix_power(P, steps[k])[combo[k + 1], combo[k]]
            lo = [self.density.lows[c, 0] for c in combo]
            hi = [self.density.highs[c, 0] for c in combo]
            vol = float(np.prod(np.subtract(hi, lo)))
            if prob <= 0:
                continue
            lows.append(lo)
            highs.append(hi)
            weights.append(prob / vol)
        return BlockedDensity(lows, highs, weights)

    def matched_binomial(self) -> BinomialProcess:
        return BinomialProcess(self.p, self.embedded_density(), tag="binomial_matched")


@dataclass(frozen=True)
class LatticeFieldProcess:
    """Square fields: a request for ``n = k^2`` points simulates extent ``(k, k)``."""

    spec: LatticeFieldSpec
    tag: str = "lattice_field"

    @property
    def p(self) -> int:
        return self.spec.density.p

    def extent_for(self, n: int) -> tuple:
        k = math.isqrt(n)
        if k * k != n:
            raise SpecError("n_grid", f"lattice sample sizes must be perfect squares, got {n}")
        return (k, k)

    def sample(self, n: int, seed) -> Sample:
        return sample_lattice_field(replace(self.spec, extent=self.extent_for(n)), seed)

    def matched_binomial(self) -> BinomialProcess:
        return BinomialProcess(self.p, self.spec.density, tag="binomial_matched")


ProcessSpec = (BinomialProcess, BlockedChainProcess, DensityChainProcess, DelayEmbeddingProcess,
               LatticeFieldProcess)

"""Marton couplings of finite-state chains and the concentration bounds built on them."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .geometry import Metric, covering_number_cube, sup_ball_volume
from .samplers import HiddenChainSpec, LatticeFieldSpec, SpecError

MAX_AUGMENTED_STATES = 4096


class NoMixingError(ValueError):
    """The chain is reducible or periodic, so it has no mixing time."""


def total_variation(u, v) -> float:
    return 0.5 * float(np.sum(np.abs(np.asarray(u, dtype=float) - np.asarray(v, dtype=float))))


def max_pairwise_tv(rows: np.ndarray) -> float:
    """``max_{z, z'} d_TV(rows[z], rows[z'])``."""
    rows = np.asarray(rows, dtype=np.float64)
    diff = np.abs(rows[:, None, :] - rows[None, :, :]).sum(axis=-1)
    return float(0.5 * diff.max())


@dataclass(frozen=True)
class MixingMatrix:
    """Upper-triangular matrix of coupling-failure probabilities with unit diagonal."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.float64)
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def gamma_inf(self) -> float:
        """Maximum row sum ``||Gamma||_inf``."""
        return float(self.entries.sum(axis=1).max()) if self.n else 0.0

    @property
    def spectral_norm(self) -> float:
        return float(np.linalg.norm(self.entries, 2)) if self.n else 0.0

    def check(self) -> None:
        e = self.entries
        if np.any(np.diag(e) != 1.0):
            raise AssertionError("diagonal must be 1")
        if np.any(np.tril(e, -1) != 0.0):
            raise AssertionError("entries below the diagonal must vanish")
        if np.any(e < 0) or np.any(e > 1):
            raise AssertionError("entries must lie in [0, 1]")


def coupling_decay(hidden: HiddenChainSpec, horizon: int) -> np.ndarray:
    """``delta[k] = max_{z,z'} d_TV(P^k(z, .), P^k(z', .))`` for ``k < horizon``."""
    P = hidden.transition
    K = P.shape[0]
    out = np.empty(max(horizon, 0))
    power = np.eye(K)
    for k in range(horizon):
        out[k] = min(1.0, max_pairwise_tv(power))
        power = power @ P
    return out


def exact_mixing_matrix(hidden: HiddenChainSpec, n: int) -> MixingMatrix:
    """Mixing matrix of ``n`` consecutive states of a stationary first-order chain.

    ``Gamma[i, j]`` is the largest total variation between the laws of
    ``Z_j`` started from two states at time ``i``, which by the Markov
    property is also the total variation of the whole future from ``j`` on;
    the maximum runs over all state pairs, an upper bound on the essential
    supremum.
    """
    if n <= 0:
        raise ValueError("n must be positive")
    delta = coupling_decay(hidden, n)
    idx = np.arange(n)
    lag = idx[None, :] - idx[:, None]
    entries = np.where(lag >= 0, delta[np.clip(lag, 0, n - 1)], 0.0)
    return MixingMatrix(entries)


def augment_order(kernel: np.ndarray) -> HiddenChainSpec:
    """First-order chain on windows of an order-``m`` chain.

    ``kernel`` has shape ``(K,) * (m + 1)``: ``kernel[z_{t-m}, ..., z_{t-1}, z_t]``.
    The stationary law of the window chain is computed, not assumed.
    """
    kernel = np.asarray(kernel, dtype=np.float64)
    m = kernel.ndim - 1
    K = kernel.shape[0]
    if m < 1 or any(s != K for s in kernel.shape):
        raise SpecError("kernel", "expected a (K,)*(m+1) transition tensor")
    if K**m > MAX_AUGMENTED_STATES:
        raise SpecError("kernel", f"{K**m} augmented states exceed the cap of {MAX_AUGMENTED_STATES}")
    windows = list(itertools.product(range(K), repeat=m))
    pos = {w: i for i, w in enumerate(windows)}
    P = np.zeros((len(windows), len(windows)))
    for w in windows:
        for z in range(K):
            P[pos[w], pos[w[1:] + (z,)]] += kernel[w + (z,)]
    return HiddenChainSpec(P, stationary_distribution(P))


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    P = np.asarray(P, dtype=np.float64)
    K = P.shape[0]
    A = np.vstack([P.T - np.eye(K), np.ones((1, K))])
    b = np.zeros(K + 1)
    b[-1] = 1.0
    pi = np.linalg.lstsq(A, b, rcond=None)[0]
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def delay_window_chain(hidden: HiddenChainSpec, lags: Sequence[int]) -> HiddenChainSpec:
    """Chain of windows ``(Z_t, Z_{t-1}, ..., Z_{t-tau})`` with ``tau`` the largest lag.

    Each delay-embedded point is a function of the window, so the window
    chain's mixing matrix dominates that of the embedded process.
    """
    lags = tuple(int(l) for l in lags)
    tau = lags[-1] if lags else 0
    K = hidden.n_states
    if tau == 0:
        return hidden
    if K ** (tau + 1) > MAX_AUGMENTED_STATES:
        raise SpecError("lags", "delay window has too many states")
    # window ordered oldest first so the order-(tau+1) kernel applies directly
    windows = list(itertools.product(range(K), repeat=tau + 1))
    pos = {w: i for i, w in enumerate(windows)}
    P = np.zeros((len(windows), len(windows)))
    pi = np.zeros(len(windows))
    for w in windows:
        prob = hidden.initial[w[0]]
        for a, b in zip(w, w[1:]):
            prob *= hidden.transition[a, b]
        pi[pos[w]] = prob
        for z in range(K):
            P[pos[w], pos[w[1:] + (z,)]] = hidden.transition[w[-1], z]
    return HiddenChainSpec(P, pi)


def is_ergodic(P: np.ndarray) -> bool:
    """Primitive (irreducible and aperiodic) iff ``P^t > 0`` for ``t = (K-1)^2 + 1``."""
    K = P.shape[0]
    support = (np.asarray(P) > 0).astype(np.int64)
    power = np.eye(K, dtype=np.int64)
    for _ in range((K - 1) ** 2 + 1):
        power = np.minimum(power @ support, 1)
    return bool(np.all(power > 0))


def mixing_time(hidden: HiddenChainSpec, threshold: float = 0.25, max_steps: int = 1_000_000) -> int:
    """Smallest ``t >= 1`` with ``max_z d_TV(P^t(z, .), pi) <= threshold``."""
    P = hidden.transition
    if not is_ergodic(P):
        raise NoMixingError("chain is reducible or periodic")
    pi = hidden.initial
    power = P.copy()
    for t in range(1, max_steps + 1):
        worst = 0.5 * float(np.abs(power - pi[None, :]).sum(axis=1).max())
        if worst <= threshold:
            return t
        power = power @ P
    raise NoMixingError(f"no mixing within {max_steps} steps")


def gamma_inf_bound_delay(tau_max: int, t_mix: int) -> int:
    """``tau + 2 t_mix`` bound on ``gamma_inf`` for delay-embedded chains."""
    if tau_max < 0 or t_mix < 1:
        raise ValueError("need tau_max >= 0 and t_mix >= 1")
    return tau_max + 2 * t_mix


# ---------------------------------------------------------------------------
# maximal couplings


def maximal_coupling(p, q) -> np.ndarray:
    """Joint law of ``(X, Y)`` with marginals ``p``, ``q`` and ``P(X != Y) = d_TV(p, q)``."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    common = np.minimum(p, q)
    joint = np.diag(common)
    tv = 1.0 - common.sum()
    if tv > 0:
        joint = joint + np.outer(p - common, q - common) / tv
    return joint


def coupled_chain_paths(hidden: HiddenChainSpec, z: int, z_prime: int, horizon: int, rng: np.random.Generator,
                        size: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Two copies started at ``z`` and ``z_prime``, coupled step by step maximally.

    Once the copies agree they move together.  The failure frequency at lag
    ``k`` upper-bounds ``Gamma[i, i+k]``; for two-state symmetric chains it is
    equal to it.
    """
    P = hidden.transition
    K = P.shape[0]
    joints = {}
    x = np.full(size, z, dtype=np.int64)
    y = np.full(size, z_prime, dtype=np.int64)
    xs, ys = [x.copy()], [y.copy()]
    for _ in range(horizon):
        u = rng.random(size)
        for a in range(K):
            for b in range(K):
                sel = (x == a) & (y == b)
                if not sel.any():
                    continue
                if (a, b) not in joints:
                    joints[(a, b)] = np.cumsum(maximal_coupling(P[a], P[b]).ravel())
                    joints[(a, b)][-1] = 1.0
                k = np.searchsorted(joints[(a, b)], u[sel], side="right")
                x[sel], y[sel] = k // K, k % K
        xs.append(x.copy())
        ys.append(y.copy())
    return np.stack(xs, axis=1), np.stack(ys, axis=1)


# ---------------------------------------------------------------------------
# lattice diagnostics


def lattice_corner_influence(spec: LatticeFieldSpec, extent: Optional[Sequence[int]] = None) -> np.ndarray:
    """``max_{z,z'} d_TV`` between site laws given corner state ``z`` vs ``z'``.

    The interior kernel is additive in its two neighbours, so the law of each
    site is a linear function of its neighbours' laws and propagates exactly.
    This single-site quantity lower-bounds the corner row of the field's
    mixing matrix; it is a diagnostic for the polynomial decay condition.
    """
    N1, N2 = tuple(extent) if extent is not None else spec.extent
    T = spec.interior
    A, B, C = T[:, 0, :], T[0, :, :], T[0, 0, :]
    K = spec.density.n_blocks
    law = np.zeros((K, N1 + 1, N2 + 1, K))
    law[:, 1, 1, :] = np.eye(K)
    for i in range(1, N1 + 1):
        for j in range(1, N2 + 1):
            if i == 1 and j == 1:
                continue
            if j == 1:
                law[:, i, 1] = law[:, i - 1, 1] @ spec.axis1
            elif i == 1:
                law[:, 1, j] = law[:, 1, j - 1] @ spec.axis2
            else:
                law[:, i, j] = law[:, i - 1, j] @ A + law[:, i, j - 1] @ B - C
    out = np.zeros((N1, N2))
    for i in range(1, N1 + 1):
        for j in range(1, N2 + 1):
            out[i - 1, j - 1] = max_pairwise_tv(law[:, i, j])
    return out


def decay_sum(influence: np.ndarray, delta: float) -> float:
    """``sum_k k^delta max_{||v - u||_max = k} influence[v]`` from the corner ``u``."""
    N1, N2 = influence.shape
    i, j = np.indices((N1, N2))
    ring = np.maximum(i, j)
    total = 0.0
    for k in range(int(ring.max()) + 1):
        total += (k**delta) * float(influence[ring == k].max())
    return total


# ---------------------------------------------------------------------------
# bound evaluators


@dataclass(frozen=True)
class BoundResult:
    value: float
    terms: tuple = ()

    @property
    def trivial(self) -> bool:
        return not self.value < 1.0

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class BoundParams:
    """Inputs of the exponential inequalities.

    ``q`` is the exponent of the universal bound and ``q_tilde`` the exponent
    of the local exchange-one bound; ``radius`` is the locality radius ``r``
    (for the Betti bound: the parameter ``s``).  ``covering_log`` and
    ``ball_sup`` default to the unit-cube covering bound and
    ``n * sup_w mu(B(w, 2 r / eta))`` for Lebesgue measure.
    """

    n: int
    t: float
    a: float
    q: float
    q_tilde: float = 1.0
    c1: float = 1.0
    c2: float = 1.0
    radius: float = 1.0
    f_star: float = 1.0
    gamma_inf: float = 1.0
    p: int = 2
    eta: Optional[float] = None
    metric: Metric = Metric.EUCLIDEAN
    covering_log: Optional[float] = None
    ball_sup: Optional[float] = None

    @property
    def eta_n(self) -> float:
        return self.eta if self.eta is not None else self.n ** (1.0 / self.p)

    def resolved_covering_log(self, radius: float) -> float:
        if self.covering_log is not None:
            return self.covering_log
        return math.log(covering_number_cube(self.p, radius / self.eta_n, self.metric))

    def resolved_ball_sup(self, radius: float) -> float:
        if self.ball_sup is not None:
            return self.ball_sup
        return self.n * sup_ball_volume(self.p, 2.0 * radius / self.eta_n, self.metric)


def _check_params(params: BoundParams) -> None:
    if not params.a > 0.5:
        raise ValueError("need a > 1/2")
    if not params.t > 0:
        raise ValueError("need t > 0")
    if params.n < 1:
        raise ValueError("need n >= 1")


def abstract_exp_bound(params: BoundParams) -> BoundResult:
    """Two-term tail bound for ``P(|H_n - E H_n| > n^a t)``, uncapped."""
    _check_params(params)
    n, t, a, q, qt = params.n, params.t, params.a, params.q, params.q_tilde
    c1, c2, g_inf, f_star = params.c1, params.c2, params.gamma_inf, params.f_star
    gamma = (2 * a - 1) / (2 * qt + 1)
    r = params.radius
    first = 2.0 * math.exp(-(n**gamma) * t**2 / (4**qt * 2.0 * (16.0 * c2 * g_inf) ** 2))
    prefactor = 2.0 * c1 * math.e * n ** (2 * q + 1 - gamma * qt - a) / (c2 * 2**qt * g_inf)
    prefactor *= n ** (a - q) + 2.0 * c1 / t
    exponent = -(n**gamma - params.resolved_covering_log(r) - f_star * (math.e - 1.0) * params.resolved_ball_sup(r))
    second = _times_exp(prefactor, exponent)
    return BoundResult(first + second, (first, second))


def _times_exp(factor: float, exponent: float) -> float:
    if factor == 0.0:
        return 0.0
    log_val = math.log(factor) + exponent
    return math.exp(log_val) if log_val < 709.0 else math.inf


def betti_exp_bound(params: BoundParams) -> BoundResult:
    """Tail bound for persistent Betti numbers: ``c1 = 1``, ``c2 = 2``,
    ``q_tilde = q + 1`` and locality radius ``2 s`` (``params.radius`` is ``s``)."""
    s = params.radius
    return abstract_exp_bound(replace(params, c1=1.0, c2=2.0, q_tilde=params.q + 1, radius=2.0 * s))


def kernel_concentration_bound(n: int, t: float, f_star: float, mu_Bn: float) -> BoundResult:
    """``exp(-t + (e - 1) f* n mu(B_n))`` for counts of visits to ``B_n``."""
    if t < 0:
        raise ValueError("need t >= 0")
    return BoundResult(math.exp(-t + (math.e - 1.0) * f_star * n * mu_Bn))


def simplex_count_bound(n: int, j: int, r: float, p: int, f_star: float, region_measure: float,
                        metric: Metric = Metric.EUCLIDEAN, eta: Optional[float] = None) -> float:
    """``(f*)^2 n^(j+1) mu(A / eta) sup_x mu(B(x, 2 r / eta))^j`` (critical ``eta`` by default)."""
    eta = n ** (1.0 / p) if eta is None else eta
    return f_star**2 * n ** (j + 1) * region_measure * sup_ball_volume(p, 2.0 * r / eta, metric) ** j


def mcdiarmid_bound(gamma_matrix, c, t: float) -> BoundResult:
    """``2 exp(-2 t^2 / ||Gamma c||^2)`` for Hamming-Lipschitz functions."""
    G = gamma_matrix.entries if isinstance(gamma_matrix, MixingMatrix) else np.asarray(gamma_matrix, dtype=float)
    c = np.asarray(c, dtype=np.float64)
    if G.shape[1] != len(c):
        raise ValueError("Lipschitz vector length does not match the mixing matrix")
    if np.any(c < 0):
        raise ValueError("Lipschitz constants must be nonnegative")
    norm_sq = float(np.sum((G @ c) ** 2))
    if t == 0 or norm_sq == 0:
        return BoundResult(2.0 if t == 0 else 0.0)
    return BoundResult(2.0 * math.exp(-2.0 * t * t / norm_sq))

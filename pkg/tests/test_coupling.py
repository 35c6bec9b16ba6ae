import math

import numpy as np
import pytest

from perbetti.coupling import (BoundParams, NoMixingError, abstract_exp_bound, augment_order, betti_exp_bound,
                               coupled_chain_paths, coupling_decay, decay_sum, delay_window_chain,
                               exact_mixing_matrix, gamma_inf_bound_delay, kernel_concentration_bound,
                               lattice_corner_influence, maximal_coupling, mcdiarmid_bound, mixing_time,
                               simplex_count_bound, total_variation)
from perbetti.samplers import HiddenChainSpec, SpecError


def flip(eps):
    return HiddenChainSpec([[1 - eps, eps], [eps, 1 - eps]], [0.5, 0.5])


def test_iid_chain():
    h = HiddenChainSpec.independent([0.2, 0.3, 0.5])
    G = exact_mixing_matrix(h, 10)
    G.check()
    assert np.array_equal(G.entries, np.eye(10))
    assert G.gamma_inf == 1.0
    assert mixing_time(h) == 1


@pytest.mark.parametrize("eps", [0.05, 0.25, 0.45])
def test_two_state_closed_form(eps):
    G = exact_mixing_matrix(flip(eps), 25)
    G.check()
    for i in range(4):
        for k in range(21 - i):
            assert abs(G.entries[i, i + k] - abs(1 - 2 * eps) ** k) <= 1e-12
    # shift invariance of a stationary chain
    assert np.array_equal(G.entries[:-1, :-1], G.entries[1:, 1:])


def test_identity_chain_no_mixing():
    h = HiddenChainSpec(np.eye(2), [0.5, 0.5])
    for n in (5, 10):
        G = exact_mixing_matrix(h, n)
        assert np.array_equal(G.entries, np.triu(np.ones((n, n))))
        assert G.gamma_inf == n
    with pytest.raises(NoMixingError):
        mixing_time(h)
    with pytest.raises(NoMixingError):
        mixing_time(HiddenChainSpec([[0, 1], [1, 0]], [0.5, 0.5]))
    with pytest.raises(ValueError):
        exact_mixing_matrix(h, 0)


def test_mixing_times():
    assert mixing_time(flip(0.25)) == 1
    assert mixing_time(flip(0.05)) == 7
    assert min(t for t in range(1, 50) if 0.5 * 0.9**t <= 0.25) == 7


def test_delay_bound():
    assert gamma_inf_bound_delay(3, 5) == 13
    assert gamma_inf_bound_delay(0, 1) == 2
    for eps in (0.05, 0.25, 0.45):
        h = flip(eps)
        G = exact_mixing_matrix(delay_window_chain(h, (1, 2)), 80)
        # eps = 0.25 attains the bound in the limit; allow for rounding in the matrix powers
        assert G.gamma_inf <= gamma_inf_bound_delay(2, mixing_time(h)) + 1e-12


def test_window_chain_stationary():
    h = HiddenChainSpec.lazy([0.3, 0.7], 0.4)
    W = delay_window_chain(h, (2,))
    assert W.n_states == 8
    assert np.allclose(W.initial @ W.transition, W.initial)


def test_augment_order():
    K = 2
    kernel = np.full((K, K, K), 0.5)
    kernel[1, 1] = [0.1, 0.9]
    h = augment_order(kernel)
    assert h.n_states == 4
    with pytest.raises(SpecError):
        augment_order(np.full((5,) * 7, 0.2))


def test_maximal_coupling():
    p, q = np.array([0.5, 0.3, 0.2]), np.array([0.2, 0.3, 0.5])
    J = maximal_coupling(p, q)
    assert np.allclose(J.sum(axis=1), p) and np.allclose(J.sum(axis=0), q)
    assert 1 - np.trace(J) == pytest.approx(total_variation(p, q))


def test_coupled_paths_two_state():
    eps = 0.2
    x, y = coupled_chain_paths(flip(eps), 0, 1, 8, np.random.default_rng(0), size=40_000)
    fail = (x != y).mean(axis=0)
    exact = coupling_decay(flip(eps), 9)
    se = np.sqrt(exact * (1 - exact) / 40_000)
    assert np.all(np.abs(fail - exact) <= 4 * se + 1e-12)


def test_lattice_influence_decays():
    from marginal_checks import lattice_spec

    spec = lattice_spec((12, 12))
    infl = lattice_corner_influence(spec)
    assert infl[0, 0] == 1.0
    assert infl[-1, -1] < infl[1, 1] < 1.0
    assert np.isfinite(decay_sum(infl, 3.5))


BENCH = BoundParams(n=10**4, t=1.0, a=0.9, q=1, p=2, gamma_inf=4.0, f_star=2.0, radius=1.0, eta=10**2)


def _betti_bound_by_hand(n, t, a, q, g, f, s, eta):
    # independent arithmetic path for the Betti display, evaluated term by term in logs
    gamma = (2 * a - 1) / (2 * q + 3)
    first = 2 * math.exp(-(n**gamma) * t**2 / (2 * (2 ** (q + 1) * 32 * g) ** 2))
    cover = math.ceil(1 / (2 * (2 * s / eta) / math.sqrt(2))) ** 2
    ball = n * min(1.0, math.pi * (4 * s / eta) ** 2)
    log_pref = 1 + ((q + 1) * (1 - gamma) + q - a) * math.log(n) - math.log(2 ** (q + 1) * g)
    log_pref += math.log(1 / n ** (q - a) + 2 / t)
    second = math.exp(log_pref - (n**gamma - math.log(cover) - f * (math.e - 1) * ball))
    return first + second


def test_betti_bound_benchmark():
    val = betti_exp_bound(BENCH)
    ref = _betti_bound_by_hand(10**4, 1.0, 0.9, 1, 4.0, 2.0, 1.0, 100.0)
    assert val.value == pytest.approx(ref, rel=1e-10)
    assert val.trivial


def test_abstract_bound_benchmark():
    n, t, a, qt, q, c1, c2, g, f, r, eta = 10**4, 1.0, 0.9, 2.0, 1.0, 1.0, 1.0, 4.0, 2.0, 1.0, 100.0
    gamma = (2 * a - 1) / (2 * qt + 1)
    first = 2 * math.exp(-(n**gamma) * t**2 / (4**qt * 2 * (16 * c2 * g) ** 2))
    cover = math.ceil(1 / (2 * (r / eta) / math.sqrt(2))) ** 2
    ball = n * math.pi * (2 * r / eta) ** 2
    second = (2 * c1 * math.e * n ** (2 * q + 1 - gamma * qt - a) / (c2 * 2**qt * g)) * (1 / n ** (q - a) + 2 * c1 / t)
    second *= math.exp(-(n**gamma - math.log(cover) - f * (math.e - 1) * ball))
    val = abstract_exp_bound(BoundParams(n=n, t=t, a=a, q=q, q_tilde=qt, c1=c1, c2=c2, gamma_inf=g, f_star=f,
                                         radius=r, eta=eta, p=2))
    assert val.value == pytest.approx(first + second, rel=1e-10)


def test_bounds_monotone_in_t():
    for fn in (abstract_exp_bound, betti_exp_bound):
        vals = [fn(BoundParams(n=500, t=t, a=0.8, q=0, p=2)).value for t in np.geomspace(0.01, 1e4, 60)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))
    kern = [kernel_concentration_bound(100, t, 1.0, 0.01).value for t in range(20)]
    assert all(a >= b for a, b in zip(kern, kern[1:]))
    G = exact_mixing_matrix(flip(0.2), 30)
    mc = [mcdiarmid_bound(G, np.ones(30), t).value for t in np.linspace(0, 30, 50)]
    assert all(a >= b for a, b in zip(mc, mc[1:]))


def test_bound_large_t_limit():
    big = [betti_exp_bound(BoundParams(n=200, t=t, a=0.8, q=0, p=2)) for t in (1e6, 1e9)]
    assert big[0].terms[0] == pytest.approx(0.0, abs=1e-12)
    assert big[1].value == pytest.approx(big[0].value, rel=1e-3)


def test_bound_small_n_trivial_and_errors():
    assert betti_exp_bound(BoundParams(n=10, t=1.0, a=0.8, q=1, p=2)).trivial
    with pytest.raises(ValueError):
        abstract_exp_bound(BoundParams(n=10, t=1.0, a=0.5, q=1))


def test_kernel_bound_values():
    assert kernel_concentration_bound(1, 10, 1, 1).value == pytest.approx(math.exp(-10 + math.e - 1), rel=1e-14)
    assert kernel_concentration_bound(1, 10, 1, 1).value == pytest.approx(2.5310e-4, rel=1e-4)
    b0 = kernel_concentration_bound(50, 0, 1.5, 0.02)
    assert b0.trivial and b0.value >= 1


def test_mcdiarmid_values():
    n = 50
    assert mcdiarmid_bound(np.eye(n), np.ones(n), math.sqrt(n / 2)).value == pytest.approx(2 * math.exp(-1))
    assert mcdiarmid_bound(np.eye(n), np.ones(n), 0).value == 2.0
    with pytest.raises(ValueError):
        mcdiarmid_bound(np.eye(n), np.ones(n - 1), 1.0)


def test_simplex_count_bound():
    from perbetti.filtration import build_rips, count_simplices, count_simplices_localized
    from perbetti.samplers import sample_binomial

    n, p = 500, 2
    eta = n ** (1 / p)
    bound0 = simplex_count_bound(n, 0, 0.5, p, 1.0, 1.0)
    bound1 = simplex_count_bound(n, 1, 0.5, p, 1.0, 1.0)
    assert bound0 == n
    counts0, counts1 = [], []
    for s in range(200):
        cx = build_rips(sample_binomial(n, None, s, p=p).cloud, max_dim=1, max_radius=0.5 / eta)
        counts1.append(count_simplices(cx, 1, 0.5 / eta))
        counts0.append(count_simplices_localized(cx, 0, 0.5 / eta, range(n)))
    assert np.mean(counts0) <= bound0
    assert np.mean(counts1) <= bound1
    cx = build_rips(sample_binomial(n, None, 0, p=p).cloud, max_dim=2, max_radius=0.0)
    assert count_simplices(cx, 1, 0.0) == 0

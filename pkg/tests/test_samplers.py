import itertools
import math

import numpy as np
import pytest
from marginal_checks import DENSITY, check_binomial, chain_frequency_se, lattice_spec
from scipy import stats

from perbetti.samplers import (BinomialProcess, BlockedChainProcess, BlockedDensity, DelayEmbeddingProcess,
                               DensityChainProcess, DensityChainSpec, EnvelopeError, HiddenChainSpec,
                               LatticeFieldProcess, LatticeFieldSpec, SpecError, UnsupportedDimensionError,
                               delay_embed, lattice_sites, order_key, sample_binomial, sample_blocked_chain,
                               sample_density_chain, sample_lattice_field, total_order, total_order_2d)


def test_blocked_density_validation():
    with pytest.raises(SpecError) as exc:
        BlockedDensity([[0.0], [0.5]], [[0.5], [0.9]], [1.0, 1.0])
    assert exc.value.field == "blocks"
    with pytest.raises(SpecError) as exc:
        BlockedDensity([[0.0], [0.5]], [[0.5], [1.0]], [1.0, 0.5])
    assert exc.value.field == "weights"
    with pytest.raises(SpecError):
        BlockedDensity([[0.0], [0.4]], [[0.6], [1.0]], [1.0, 1.0])


def test_blocked_density_evaluate():
    assert DENSITY.evaluate([[0.1, 0.1], [0.9, 0.9], [1.0, 1.0]]).tolist() == [1.6, 0.8, 0.8]
    assert np.allclose(DENSITY.masses, [0.4, 0.2, 0.2, 0.2])


def test_hidden_chain_validation():
    with pytest.raises(SpecError) as exc:
        HiddenChainSpec([[0.9, 0.1], [0.1, 0.9]], [0.7, 0.3])
    assert exc.value.field == "initial"
    with pytest.raises(SpecError):
        HiddenChainSpec([[0.9, 0.2], [0.1, 0.9]], [0.5, 0.5])


def test_binomial_empty_and_deterministic():
    assert len(sample_binomial(0, None, 1, p=2)) == 0
    a = sample_binomial(50, DENSITY, 5).cloud
    b = sample_binomial(50, DENSITY, 5).cloud
    assert a == b


def test_binomial_marginals():
    for name, ok, detail in check_binomial(101):
        assert ok, (name, detail)


def test_binomial_mean_calibration():
    # z-scores of the coordinate means over many seeds are standard normal
    z = [(sample_binomial(2000, None, s, p=1).cloud.points.mean() - 0.5) / (math.sqrt(1 / 12) / math.sqrt(2000))
         for s in range(400)]
    assert stats.kstest(z, "norm").pvalue > 0.001


@pytest.mark.parametrize("make", [
    lambda s: BinomialProcess(2, DENSITY).sample(40, s),
    lambda s: BlockedChainProcess(DENSITY, HiddenChainSpec.lazy(DENSITY.masses, 0.5)).sample(40, s),
    lambda s: DensityChainProcess(DensityChainSpec.sine_product(0.5, 2, 2)).sample(40, s),
    lambda s: LatticeFieldProcess(lattice_spec((1, 1))).sample(36, s),
    lambda s: DelayEmbeddingProcess(BlockedDensity.grid(2, 1, [1.2, 0.8]),
                                    HiddenChainSpec.lazy([0.6, 0.4], 0.3), (1, 3)).sample(40, s),
])
def test_samplers_deterministic(make):
    a, b, c = make(11), make(11), make(12)
    assert np.array_equal(a.cloud.points, b.cloud.points)
    assert not np.array_equal(a.cloud.points, c.cloud.points)


def test_blocked_chain_invariance_on_cells():
    hidden = HiddenChainSpec.lazy(DENSITY.masses, 0.7)
    a = sample_blocked_chain(500, DENSITY, hidden, 3)
    b = sample_blocked_chain(500, DENSITY, hidden, 3, coord_seed=4)
    assert not np.array_equal(a.cloud.points, b.cloud.points)
    assert np.array_equal(a.hidden_path, b.hidden_path)


def test_blocked_chain_requires_matching_masses():
    with pytest.raises(SpecError):
        sample_blocked_chain(5, DENSITY, HiddenChainSpec.independent([0.25] * 4), 0)


def test_chain_frequency_se_independent_case():
    pi = np.array([0.4, 0.6])
    P = np.tile(pi, (2, 1))
    assert chain_frequency_se(P, pi, 0, 100) == pytest.approx(math.sqrt(0.24 / 100))


def test_density_chain_envelope_error():
    spec = DensityChainSpec(1, 1, lambda z: np.ones(z.shape[:-2]), 1e-6, 1.0)
    with pytest.raises(EnvelopeError):
        sample_density_chain(10, spec, 0)


def test_density_chain_burn_in_default():
    spec = DensityChainSpec.sine_product(0.5, 2, 1)
    assert spec.default_burn_in == 10 * 2 * 3


def test_density_chain_conditionals_normalized():
    spec = DensityChainSpec.sine_product(0.6, 1, 1, quad_points=200)
    grid = (np.arange(200) + 0.5) / 200
    for past in (0.1, 0.37, 0.8):
        assert abs(np.mean(spec.conditional([past], grid[:, None])) - 1) < 1e-6


def test_density_chain_blocked_marginal():
    spec = DensityChainSpec.sine_product(0.5, 1, 2)
    bm = spec.blocked_marginal(4)
    assert np.allclose(bm.weights, 1.0, atol=1e-9)
    spec.spot_check(np.random.default_rng(0))


def test_delay_embed_examples():
    assert delay_embed([0.1, 0.2, 0.3]).points.tolist() == [[0.1], [0.2], [0.3]]
    pts = delay_embed([0.1, 0.2, 0.3, 0.4], (1,)).points
    assert np.allclose(pts, [[0.2, 0.1], [0.3, 0.2], [0.4, 0.3]])
    with pytest.raises(ValueError):
        delay_embed([0.1, 0.2, 0.3], (2, 1))


def test_delay_embed_indexing(rng):
    z = rng.random(30)
    lags = (2, 3, 7)
    pts = delay_embed(z, lags).points
    assert len(pts) == 30 - 7
    for row, t in zip(pts, range(7, 30)):
        assert row.tolist() == [z[t], z[t - 2], z[t - 3], z[t - 7]]


def test_delay_embedding_density_is_a_law():
    proc = DelayEmbeddingProcess(BlockedDensity.grid(2, 1, [1.2, 0.8]), HiddenChainSpec.lazy([0.6, 0.4], 0.3), (1, 3))
    dens = proc.embedded_density()
    assert dens.p == 3 and dens.masses.sum() == pytest.approx(1.0)
    # empirical block frequencies of the embedded cloud against the exact law
    s = proc.sample(40_000, 1)
    freqs = np.bincount(dens.block_of(s.cloud.points), minlength=dens.n_blocks) / len(s)
    assert np.max(np.abs(freqs - dens.masses)) < 0.02


def test_total_order_examples():
    assert total_order_2d((1, 1), (1, 1)) == 0
    assert total_order_2d((2, 1), (1, 2)) == 1
    assert total_order_2d((1, 2), (2, 1)) == -1


def _definition_greater(u, v):
    cu, cv = np.cumsum(u), np.cumsum(v)
    d = len(u)
    for j in range(d):
        if cu[j] > cv[j] and all(cu[k] == cv[k] for k in range(j + 1, d)):
            return True
    return False


def test_total_order_exhaustive():
    pts = list(itertools.product(range(1, 6), repeat=2))
    for u in pts:
        for v in pts:
            c = total_order(u, v)
            assert (c == 1) == _definition_greater(u, v)
            assert (c == -1) == _definition_greater(v, u)
            assert (c == 0) == (u == v)
            assert total_order(v, u) == -c
    for u, v, w in itertools.product(pts, repeat=3):
        if total_order(u, v) == 1 and total_order(v, w) == 1:
            assert total_order(u, w) == 1
    ordered = [tuple(s) for s in lattice_sites((5, 5))]
    assert ordered == sorted(pts, key=order_key)


def test_lattice_sites_respect_predecessors():
    seen = set()
    for i, j in lattice_sites((6, 4)).tolist():
        if i > 1:
            assert (i - 1, j) in seen
        if j > 1:
            assert (i, j - 1) in seen
        seen.add((i, j))


def test_lattice_spec_validation():
    h = HiddenChainSpec.lazy(DENSITY.masses, 0.5)
    with pytest.raises(SpecError) as exc:
        LatticeFieldSpec.mixture(DENSITY, h.transition, h.transition, 0.5, (10, 2), min_ratio=0.5)
    assert exc.value.field == "extent"
    # law depends on max(a, b): not additive in the two neighbours
    bad = np.array([[np.eye(4)[max(a, b)] for b in range(4)] for a in range(4)])
    with pytest.raises(SpecError):
        LatticeFieldSpec(DENSITY, h.transition, h.transition, bad)


def test_lattice_single_site_and_dimension():
    s = sample_lattice_field(lattice_spec((1, 1)), 3)
    assert len(s) == 1 and s.sites.tolist() == [[1, 1]]
    spec = lattice_spec((1, 1))
    object.__setattr__(spec, "extent", (1, 1, 1))
    with pytest.raises(UnsupportedDimensionError):
        sample_lattice_field(spec, 0)


def test_lattice_process_sizes():
    proc = LatticeFieldProcess(lattice_spec((1, 1)))
    assert len(proc.sample(49, 0)) == 49
    with pytest.raises(SpecError):
        proc.sample(50, 0)

import math

import numpy as np
import pytest
from conftest import gf2_rank, random_cloud

from perbetti.filtration import build_cech, build_rips
from perbetti.geometry import PointCloud
from perbetti.persistence import (BettiQuery, BoundaryMatrix, InvalidQueryError, PersistenceDiagram, diagram,
                                  euler_characteristic_check, geometric_lemma_gap, persistence_pairs,
                                  persistent_betti, persistent_betti_direct, read_diagram, reduce,
                                  write_diagram)

SQUARE = PointCloud([[0, 0], [1, 0], [1, 1], [0, 1]])


def test_single_vertex():
    cx = build_rips(PointCloud([[0.5, 0.5]]), max_dim=1, max_radius=1)
    red = reduce(BoundaryMatrix.from_complex(cx))
    assert red.pairs == [] and red.essential == [0]
    assert list(diagram(cx)) == [(0.0, math.inf, 0)]


def test_two_vertices_one_edge():
    cx = build_rips(PointCloud([[0, 0], [0.5, 0]]), max_dim=1, max_radius=1)
    assert sorted(diagram(cx)) == [(0.0, 0.5, 0), (0.0, math.inf, 0)]


def test_unit_square():
    cx = build_rips(SQUARE, max_dim=2, max_radius=2)
    h1 = diagram(cx).pairs(1)
    assert len(h1) == 1
    assert h1[0][0] == 1.0 and h1[0][1] == pytest.approx(math.sqrt(2))
    assert persistent_betti(diagram(cx), BettiQuery(1, 1, 1.2)) == 1


def test_equilateral_triangle_no_loop():
    cx = build_rips(PointCloud([[0, 0], [1, 0], [0.5, math.sqrt(3) / 2]]), max_dim=2, max_radius=1.5)
    assert diagram(cx).pairs(1) == []


def test_betti_queries():
    cx = build_rips(SQUARE, max_dim=2, max_radius=2)
    assert persistent_betti(diagram(cx), BettiQuery(0, 10, 10)) == 1
    assert persistent_betti(PersistenceDiagram([], [], []), BettiQuery(0, 1, 2)) == 0
    with pytest.raises(InvalidQueryError):
        BettiQuery(0, 2, 1)


def test_direct_examples():
    pts = np.random.default_rng(0).random((6, 2))
    cx = build_rips(pts, max_dim=2, max_radius=np.inf)
    assert persistent_betti_direct(cx, BettiQuery(0, 0, 0)) == 6
    diag = diagram(cx)
    for r in np.linspace(0, 1.2, 7):
        assert persistent_betti_direct(cx, BettiQuery(0, r, r)) == persistent_betti(diag, BettiQuery(0, r, r))


@pytest.mark.parametrize("seed", range(8))
def test_boundary_squared_and_rank_nullity(seed):
    gen = np.random.default_rng(seed)
    cx = build_rips(gen.random((10, 2)), max_dim=2, max_radius=0.8)
    bm = BoundaryMatrix.from_complex(cx)
    bm.check_boundary_squared()
    pairs = persistence_pairs(cx)
    for r in np.unique(cx.values):
        k = int(np.searchsorted(cx.values, r, side="right"))
        simp = cx.simplices[:k]
        by_dim = {q: [s for s in simp if len(s) == q + 1] for q in range(4)}

        def rank(q):
            if q == 0 or not by_dim[q] or not by_dim[q - 1]:
                return 0
            rows = []
            for s in by_dim[q]:
                faces = {s[:i] + s[i + 1:] for i in range(len(s))}
                rows.append([1 if f in faces else 0 for f in by_dim[q - 1]])
            return gf2_rank(rows)

        for q in (0, 1):
            expected = len(by_dim[q]) - rank(q) - rank(q + 1)
            assert pairs.betti(q, r) == expected


@pytest.mark.parametrize("seed", range(10))
def test_diagram_equals_definition(seed):
    gen = np.random.default_rng(1000 + seed)
    pts = random_cloud(gen, int(gen.integers(2, 10)), 2, grid=4 if seed % 2 else None)
    cx = build_rips(pts, max_dim=2, max_radius=np.inf)
    diag = diagram(cx)
    grid = np.linspace(0, 1.5, 8)
    for q in (0, 1):
        for i, r in enumerate(grid):
            for s in grid[i:]:
                query = BettiQuery(q, r, s)
                assert persistent_betti(diag, query) == persistent_betti_direct(cx, query)


def test_clearing_agrees(rng):
    for _ in range(10):
        cx = build_rips(rng.random((9, 3)), max_dim=3, max_radius=0.9)
        assert diagram(cx) == diagram(cx, clearing=True)


def test_monotonicity(rng):
    cx = build_rips(rng.random((10, 2)), max_dim=2, max_radius=np.inf)
    diag = diagram(cx)
    grid = np.linspace(0, 1.2, 10)
    for q in (0, 1):
        for i, r in enumerate(grid):
            vals = [persistent_betti(diag, BettiQuery(q, r, s)) for s in grid[i:]]
            assert all(a >= b for a, b in zip(vals, vals[1:]))
        for s in grid:
            vals = [persistent_betti(diag, BettiQuery(q, r, s)) for r in grid if r <= s]
            assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_euler_consistency(rng):
    cx = build_cech(rng.random((9, 2)), max_dim=2, max_radius=0.5)
    pairs = persistence_pairs(cx)
    for r in rng.random(20) * 0.5:
        lhs, rhs = euler_characteristic_check(cx, r, pairs)
        assert lhs == rhs


def test_cech_degree_cap():
    cx = build_cech(np.random.default_rng(3).random((8, 2)), max_dim=3, max_radius=1)
    assert cx.max_homology_degree == 1
    assert set(diagram(cx).dims.tolist()) <= {0, 1}


def test_geometric_lemma_examples():
    pts = np.random.default_rng(4).random((6, 2))
    y = build_rips(pts, max_dim=2, max_radius=0.5)
    assert geometric_lemma_gap(y, y, BettiQuery(0, 0.1, 0.2)) == (0, 0)
    x = build_rips(PointCloud([[0.0, 0.0]]), max_dim=1, max_radius=0.1)
    y = build_rips(PointCloud([[0.0, 0.0], [1.0, 1.0]]), max_dim=1, max_radius=0.1)
    assert geometric_lemma_gap(x, y, BettiQuery(0, 0.05, 0.05)) == (1, 1)
    with pytest.raises(ValueError):
        geometric_lemma_gap(y, y, BettiQuery(0, 0, 0), injection=[0, 0])
    with pytest.raises(ValueError):
        geometric_lemma_gap(x, y, BettiQuery(0, 0, 0), injection=[5])


def test_geometric_lemma_random_subsets(rng):
    for _ in range(100):
        n = int(rng.integers(1, 10))
        pts = rng.random((n, 2))
        sub = np.sort(rng.choice(n, size=int(rng.integers(0, n + 1)), replace=False))
        q = int(rng.integers(0, 2))
        r, s = np.sort(rng.random(2))
        y = build_rips(pts, max_dim=q + 1, max_radius=s)
        x = build_rips(pts[sub] if len(sub) else np.zeros((0, 2)), max_dim=q + 1, max_radius=s)
        lhs, rhs = geometric_lemma_gap(x, y, BettiQuery(q, r, s), sub)
        assert lhs <= rhs


def test_diagram_file_roundtrip(tmp_path, rng):
    diag = diagram(build_rips(rng.random((8, 2)), max_dim=2, max_radius=0.6))
    path = tmp_path / "d.csv"
    write_diagram(diag, path)
    text = path.read_text()
    assert text.startswith("dim,birth,death\n") and ",inf\n" in text
    assert read_diagram(path) == diag

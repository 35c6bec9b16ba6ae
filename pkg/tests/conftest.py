import itertools

import numpy as np
import pytest

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


def random_cloud(rng, n, p, grid=None):
    """Uniform cloud, or points on a coarse grid (many tied distances) when ``grid`` is set."""
    if grid:
        return rng.integers(0, grid + 1, size=(n, p)) / grid
    return rng.random((n, p))


def gf2_rank(rows):
    """Rank over F2 of a list of 0/1 row vectors, by elimination on Python int bitmasks."""
    basis = {}
    for row in rows:
        v = 0
        for k, bit in enumerate(row):
            if bit:
                v |= 1 << k
        while v:
            top = v.bit_length() - 1
            if top not in basis:
                basis[top] = v
                break
            v ^= basis[top]
    return len(basis)


def brute_rips(points, max_dim, max_radius):
    """All vertex subsets of size <= max_dim + 1 with diameter <= max_radius."""
    n = len(points)
    out = {}
    for k in range(1, max_dim + 2):
        for sub in itertools.combinations(range(n), k):
            diam = 0.0
            for a, b in itertools.combinations(sub, 2):
                diam = max(diam, float(np.sqrt(np.sum((points[a] - points[b]) ** 2))))
            if diam <= max_radius:
                out[sub] = diam
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20261018)

"""Exact minimal enclosing balls of small Euclidean point sets (Welzl)."""

from __future__ import annotations

import itertools

import numpy as np

# relative slack for the "point lies in ball" test; boundary points are common
_REL_TOL = 1e-12


def circumball(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Smallest ball with all of ``points`` on its boundary.

    ``points`` must be affinely independent (at most ``p + 1`` of them); for a
    degenerate support the least-squares center in the affine hull is used.
    """
    points = np.asarray(points, dtype=np.float64)
    k = len(points)
    if k == 0:
        return np.zeros(points.shape[1] if points.ndim == 2 else 0), 0.0
    if k == 1:
        return points[0].copy(), 0.0
    base = points[0]
    diffs = points[1:] - base
    gram = diffs @ diffs.T
    rhs = 0.5 * np.einsum("ij,ij->i", diffs, diffs)
    try:
        lam = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        lam = np.linalg.lstsq(gram, rhs, rcond=None)[0]
    center = base + lam @ diffs
    radius = float(np.max(np.linalg.norm(points - center, axis=1)))
    return center, radius


def _contains(center, radius, x) -> bool:
    return float(np.linalg.norm(x - center)) <= radius * (1.0 + _REL_TOL) + _REL_TOL


def _welzl(points: np.ndarray, idx: list[int], support: list[int], dim: int):
    if not idx or len(support) == dim + 1:
        return circumball(points[support]) if support else (np.zeros(dim), 0.0)
    last, rest = idx[-1], idx[:-1]
    center, radius = _welzl(points, rest, support, dim)
    if support or rest:
        if _contains(center, radius, points[last]):
            return center, radius
    return _welzl(points, rest, support + [last], dim)


def enclosing_ball(points) -> tuple[np.ndarray, float]:
    """Center and radius of the minimal enclosing ball of ``points``.

    Deterministic recursive Welzl; intended for simplices (a handful of points).
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be an (k, p) array")
    if len(points) == 0:
        raise ValueError("empty point set has no enclosing ball")
    return _welzl(points, list(range(len(points))), [], points.shape[1])


def enclosing_radius(points) -> float:
    return enclosing_ball(points)[1]


def enclosing_radius_bruteforce(points) -> float:
    """Minimal enclosing radius by trying every support set of size <= p + 1.

    Exponential; test oracle only.
    """
    points = np.asarray(points, dtype=np.float64)
    k, p = points.shape
    best = np.inf
    for size in range(1, min(k, p + 1) + 1):
        for support in itertools.combinations(range(k), size):
            center, radius = circumball(points[list(support)])
            if radius >= best:
                continue
            if np.all(np.linalg.norm(points - center, axis=1) <= radius * (1 + 1e-9) + 1e-12):
                best = radius
    return float(best)

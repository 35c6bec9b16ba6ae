"""Point clouds in the unit cube, metrics, ball counts and covering numbers."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import gammaln


class Metric(enum.Enum):
    EUCLIDEAN = "euclidean"
    CHEBYSHEV = "chebyshev"

    @classmethod
    def parse(cls, value) -> "Metric":
        if isinstance(value, Metric):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown metric {value!r}") from None

    def distance(self, x, y) -> float:
        diff = np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))
        if self is Metric.CHEBYSHEV:
            return float(diff.max(initial=0.0))
        return float(np.sqrt(np.sum(diff * diff)))


_CDIST_NAME = {Metric.EUCLIDEAN: "euclidean", Metric.CHEBYSHEV: "chebyshev"}


class PointCloud:
    """Ordered finite sample ``x_1, ..., x_n`` in ``[0, 1]^p``.

    Row ``i`` of :attr:`points` is observation ``i``; the order is never changed.
    """

    __slots__ = ("points",)

    def __init__(self, points, dim_p: int | None = None):
        arr = np.array(points, dtype=np.float64)
        if arr.ndim == 1:
            if arr.size == 0:
                if dim_p is None:
                    raise ValueError("dimension of an empty cloud must be given")
                arr = arr.reshape(0, dim_p)
            else:
                arr = arr.reshape(-1, 1) if dim_p in (None, 1) else arr.reshape(1, -1)
        if arr.ndim != 2:
            raise ValueError("points must form an (n, p) array")
        if dim_p is not None and arr.shape[1] != dim_p:
            raise ValueError(f"expected dimension {dim_p}, got {arr.shape[1]}")
        if arr.shape[1] < 1:
            raise ValueError("ambient dimension must be at least 1")
        if not np.all(np.isfinite(arr)):
            raise ValueError("coordinates must be finite")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("coordinates must lie in [0, 1]")
        arr.setflags(write=False)
        self.points = arr

    @property
    def dim_p(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def __getitem__(self, idx):
        return self.points[idx]

    def __eq__(self, other) -> bool:
        if not isinstance(other, PointCloud):
            return NotImplemented
        return self.points.shape == other.points.shape and np.array_equal(self.points, other.points)

    def __repr__(self) -> str:
        return f"PointCloud(n={len(self)}, p={self.dim_p})"

    def subset(self, indices) -> "PointCloud":
        return PointCloud(self.points[np.asarray(indices, dtype=int)], dim_p=self.dim_p)

    def prefix(self, n: int) -> "PointCloud":
        return PointCloud(self.points[:n], dim_p=self.dim_p)


def as_array(cloud) -> np.ndarray:
    """Coordinates of ``cloud`` as an (n, p) float array; accepts raw arrays too."""
    if isinstance(cloud, PointCloud):
        return cloud.points
    arr = np.asarray(cloud, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("dimension mismatch among points")
    return arr


def pairwise_distances(cloud, metric: Metric = Metric.EUCLIDEAN) -> np.ndarray:
    metric = Metric.parse(metric)
    if isinstance(cloud, PointCloud):
        pts = cloud.points
    elif isinstance(cloud, np.ndarray) and cloud.ndim == 2:
        pts = cloud.astype(np.float64, copy=False)
    else:
        rows = [np.atleast_1d(np.asarray(x, dtype=np.float64)) for x in cloud]
        if len({r.shape for r in rows}) > 1:
            raise ValueError("dimension mismatch among points")
        pts = np.array(rows).reshape(len(rows), -1) if rows else np.zeros((0, 1))
    if len(pts) == 0:
        return np.zeros((0, 0))
    dist = cdist(pts, pts, metric=_CDIST_NAME[metric])
    np.fill_diagonal(dist, 0.0)
    return dist


def ball_count(cloud, center, radius: float, metric: Metric = Metric.EUCLIDEAN) -> int:
    """Number of cloud points in the closed ball ``B(center, radius)``."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    metric = Metric.parse(metric)
    pts = as_array(cloud)
    if len(pts) == 0:
        return 0
    center = np.asarray(center, dtype=np.float64).reshape(1, -1)
    if center.shape[1] != pts.shape[1]:
        raise ValueError("center dimension does not match the cloud")
    d = cdist(pts, center, metric=_CDIST_NAME[metric])[:, 0]
    return int(np.count_nonzero(d <= radius))


def _cells_per_axis(half_side: float) -> int:
    # smallest k with k * 2 * half_side >= 1
    k = max(1, math.ceil(1.0 / (2.0 * half_side)))
    while k > 1 and (k - 1) * 2.0 * half_side >= 1.0:
        k -= 1
    return k


def _chebyshev_radius(p: int, r: float, metric: Metric) -> float:
    # a Euclidean r-ball contains the Chebyshev (r / sqrt(p))-ball
    return r if metric is Metric.CHEBYSHEV else r / math.sqrt(p)


def covering_number_cube(p: int, r: float, metric: Metric = Metric.EUCLIDEAN) -> int:
    """Upper bound on the ``r``-covering number of ``[0, 1]^p``.

    Uses a regular grid of cubes with side ``2r`` (Chebyshev) or
    ``2r / sqrt(p)`` (Euclidean).
    """
    if r <= 0:
        raise ValueError("covering radius must be positive")
    if p < 1:
        raise ValueError("dimension must be at least 1")
    metric = Metric.parse(metric)
    return _cells_per_axis(_chebyshev_radius(p, r, metric)) ** p


def covering_centers(p: int, r: float, metric: Metric = Metric.EUCLIDEAN) -> np.ndarray:
    """Centers of the grid cover counted by :func:`covering_number_cube`."""
    if r <= 0:
        raise ValueError("covering radius must be positive")
    metric = Metric.parse(metric)
    k = _cells_per_axis(_chebyshev_radius(p, r, metric))
    axis = (2.0 * np.arange(k) + 1.0) / (2.0 * k)
    mesh = np.meshgrid(*([axis] * p), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def unit_ball_volume(p: int) -> float:
    return math.exp((p / 2.0) * math.log(math.pi) - gammaln(p / 2.0 + 1.0))


def sup_ball_volume(p: int, radius: float, metric: Metric = Metric.EUCLIDEAN) -> float:
    """Lebesgue volume of an interior ball of the given radius, clipped to 1.

    Balls touching the boundary of the cube have smaller intersection, so this
    is the supremum over centers.
    """
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    metric = Metric.parse(metric)
    if metric is Metric.CHEBYSHEV:
        vol = (2.0 * radius) ** p
    else:
        vol = unit_ball_volume(p) * radius**p
    return min(1.0, vol)


@dataclass(frozen=True)
class ScalingRegime:
    """Scale factor ``eta_n`` applied to an n-point cloud.

    ``critical``: ``n^(1/p)``; ``supercritical``: ``n^(1/p) (log n)^(-alpha)``;
    ``subcritical``: ``n^beta`` with ``beta > 1/p``.  Only the critical regime
    is used for the limit checks; the other two are exploratory.
    """

    kind: str
    p: int
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in ("critical", "supercritical", "subcritical"):
            raise ValueError(f"unknown regime {self.kind!r}")
        if self.p < 1:
            raise ValueError("dimension must be at least 1")
        if self.kind == "supercritical" and self.param <= 0:
            raise ValueError("supercritical regime needs alpha > 0")
        if self.kind == "subcritical" and self.param <= 1.0 / self.p:
            raise ValueError("subcritical regime needs beta > 1/p")

    def __call__(self, n: int) -> float:
        if n < 1:
            raise ValueError("n must be positive")
        if self.kind == "critical":
            return n ** (1.0 / self.p)
        if self.kind == "subcritical":
            return float(n) ** self.param
        # n^(1/p) (log n)^(-alpha) decreases while log n < alpha * p; clamp there to stay monotone
        floor = self.param * self.p
        return n ** (1.0 / self.p) * max(math.log(n), floor) ** (-self.param)


def critical_scale(n: int, p: int) -> float:
    return ScalingRegime("critical", p)(n)

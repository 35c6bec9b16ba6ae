"""Vietoris-Rips and Čech filtrations of point clouds, and simplex counts.

Filtration values follow the complexes literally:

* Rips: a simplex enters at its diameter (an edge enters at the distance
  between its endpoints, *not* at half of it as in several libraries);
* Čech: a simplex enters at the radius of the minimal enclosing ball of its
  vertices, i.e. when the closed balls of that radius around its vertices
  have a common point.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .geometry import Metric, PointCloud, as_array, pairwise_distances
from .miniball import enclosing_radius

Simplex = tuple  # strictly increasing tuple of vertex indices


class ComplexKind(enum.Enum):
    RIPS = "rips"
    CECH = "cech"

    @classmethod
    def parse(cls, value) -> "ComplexKind":
        if isinstance(value, ComplexKind):
            return value
        try:
            return cls(str(value).lower().replace("č", "c"))
        except ValueError:
            raise ValueError(f"unknown complex kind {value!r}") from None


class UnsupportedMetricError(ValueError):
    pass


class BudgetExceededError(RuntimeError):
    """The complex would contain more simplices than the configured budget."""


def simplex_dim(simplex: Sequence[int]) -> int:
    return len(simplex) - 1


@dataclass(frozen=True, eq=False)
class FilteredComplex:
    """Simplices sorted by ``(value, dim, vertices)`` with their filtration values."""

    simplices: tuple
    values: np.ndarray
    kind: ComplexKind
    max_dim: int
    max_radius: float
    ambient_dim: int = 0
    n_vertices: int = 0
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if len(vals) != len(self.simplices):
            raise ValueError("one filtration value per simplex is required")
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.simplices)})
        dims = np.fromiter((len(s) - 1 for s in self.simplices), dtype=np.int64, count=len(self.simplices))
        dims.setflags(write=False)
        object.__setattr__(self, "dims", dims)

    def __len__(self) -> int:
        return len(self.simplices)

    def __iter__(self):
        return iter(zip(self.simplices, self.values))

    def index(self, simplex) -> int:
        return self._index[tuple(simplex)]

    def __contains__(self, simplex) -> bool:
        return tuple(simplex) in self._index

    def value(self, simplex) -> float:
        return float(self.values[self._index[tuple(simplex)]])

    @property
    def max_homology_degree(self) -> int:
        """Largest degree whose diagram is not truncated by ``max_dim``."""
        cap = max(self.max_dim - 1, 0)
        if self.kind is ComplexKind.CECH and self.ambient_dim:
            cap = min(cap, max(self.ambient_dim - 1, 0))
        return cap

    def same_as(self, other: "FilteredComplex", atol: float = 0.0) -> bool:
        if self.simplices != other.simplices:
            return False
        if atol == 0.0:
            return bool(np.array_equal(self.values, other.values))
        return bool(np.allclose(self.values, other.values, rtol=0.0, atol=atol))

    def truncate(self, r: float) -> "FilteredComplex":
        """Subcomplex of simplices with value <= r (a prefix in filtration order)."""
        k = int(np.searchsorted(self.values, r, side="right"))
        return FilteredComplex(self.simplices[:k], self.values[:k], self.kind, self.max_dim,
                               min(self.max_radius, r), self.ambient_dim, self.n_vertices)


def _sort_key(item):
    simplex, value = item
    return (value, len(simplex), simplex)


def make_complex(items: Iterable[tuple[Simplex, float]], kind, max_dim: int, max_radius: float,
                 ambient_dim: int = 0, n_vertices: int = 0) -> FilteredComplex:
    """Sort ``(simplex, value)`` pairs into the total filtration order."""
    ordered = sorted(((tuple(s), float(v)) for s, v in items), key=_sort_key)
    simplices = tuple(s for s, _ in ordered)
    values = np.fromiter((v for _, v in ordered), dtype=np.float64, count=len(ordered))
    return FilteredComplex(simplices, values, ComplexKind.parse(kind), int(max_dim), float(max_radius),
                           ambient_dim, n_vertices)


def _clique_expansion(n: int, dist: np.ndarray, max_dim: int, max_radius: float,
                      budget: int | None) -> list[tuple[Simplex, float]]:
    items: list[tuple[Simplex, float]] = [((i,), 0.0) for i in range(n)]
    if max_dim < 1 or n < 2:
        return items
    iu, ju = np.nonzero(np.triu(dist <= max_radius, k=1))
    upper: list[set] = [set() for _ in range(n)]
    for i, j in zip(iu.tolist(), ju.tolist()):
        upper[i].add(j)
    if budget is not None and n + len(iu) > budget:
        raise BudgetExceededError(f"{n + len(iu)} simplices exceed the budget of {budget}")

    def extend(simplex: Simplex, value: float, candidates: set):
        items.append((simplex, value))
        if budget is not None and len(items) > budget:
            raise BudgetExceededError(f"more than {budget} simplices; lower max_radius or max_dim")
        if len(simplex) > max_dim:
            return
        for v in sorted(candidates):
            new_value = max(value, float(dist[list(simplex), v].max()))
            extend(simplex + (v,), new_value, candidates & upper[v])

    for i in range(n):
        for j in sorted(upper[i]):
            extend((i, j), float(dist[i, j]), upper[i] & upper[j])
    return items


def build_rips(cloud, metric: Metric = Metric.EUCLIDEAN, max_dim: int = 1, max_radius: float = np.inf,
               budget: int | None = None) -> FilteredComplex:
    """Vietoris-Rips filtration: ``sigma`` enters at ``diam(sigma)``."""
    if max_dim < 0 or max_radius < 0:
        raise ValueError("max_dim and max_radius must be nonnegative")
    pts = as_array(cloud)
    n, p = pts.shape if pts.ndim == 2 else (0, 0)
    dist = pairwise_distances(cloud if isinstance(cloud, PointCloud) else pts, metric)
    items = _clique_expansion(n, dist, max_dim, max_radius, budget)
    return make_complex(items, ComplexKind.RIPS, max_dim, max_radius, p, n)


def build_cech(cloud, max_dim: int = 1, max_radius: float = np.inf, metric: Metric = Metric.EUCLIDEAN,
               budget: int | None = None) -> FilteredComplex:
    """Čech filtration: ``sigma`` enters at its minimal enclosing ball radius.

    Every vertex set of a Čech simplex at radius ``R`` has diameter at most
    ``2R``, so candidates come from the Rips complex at ``2R``.
    """
    if Metric.parse(metric) is not Metric.EUCLIDEAN:
        raise UnsupportedMetricError("Čech complexes are only supported for the Euclidean metric")
    if max_dim < 0 or max_radius < 0:
        raise ValueError("max_dim and max_radius must be nonnegative")
    pts = as_array(cloud)
    n, p = pts.shape
    dist = pairwise_distances(pts)
    candidates = _clique_expansion(n, dist, max_dim, 2.0 * max_radius, budget)
    candidates.sort(key=lambda item: len(item[0]))
    values: dict[Simplex, float] = {}
    for simplex, diam in candidates:
        k = len(simplex)
        if k == 1:
            values[simplex] = 0.0
            continue
        if k == 2:
            value = 0.5 * diam
        else:
            value = enclosing_radius(pts[list(simplex)])
        faces = [simplex[:i] + simplex[i + 1:] for i in range(k)]
        if any(f not in values for f in faces):
            continue
        # enforce face monotonicity against rounding between different support sets
        value = max([value] + [values[f] for f in faces])
        if value <= max_radius:
            values[simplex] = value
    return make_complex(values.items(), ComplexKind.CECH, max_dim, max_radius, p, n)


def build_complex(cloud, kind, metric: Metric = Metric.EUCLIDEAN, max_dim: int = 1,
                  max_radius: float = np.inf, budget: int | None = None) -> FilteredComplex:
    kind = ComplexKind.parse(kind)
    if kind is ComplexKind.RIPS:
        return build_rips(cloud, metric, max_dim, max_radius, budget)
    return build_cech(cloud, max_dim, max_radius, metric, budget)


def count_simplices(complex_: FilteredComplex, j: int, r: float) -> int:
    """Number of ``j``-simplices with filtration value ``<= r``."""
    if len(complex_) == 0:
        return 0
    k = int(np.searchsorted(complex_.values, r, side="right"))
    return int(np.count_nonzero(complex_.dims[:k] == j))


def count_simplices_localized(complex_: FilteredComplex, j: int, r: float, vertex_set) -> int:
    """Number of ``j``-simplices at value ``<= r`` with a vertex in ``vertex_set``."""
    vertex_set = set(vertex_set)
    if not vertex_set or len(complex_) == 0:
        return 0
    k = int(np.searchsorted(complex_.values, r, side="right"))
    return sum(1 for s in complex_.simplices[:k] if len(s) == j + 1 and not vertex_set.isdisjoint(s))


def rescale_complex(complex_: FilteredComplex, eta: float) -> FilteredComplex:
    """Filtration of ``eta * X``: same simplices, values multiplied by ``eta``."""
    if not eta > 0:
        raise ValueError("scale factor must be positive")
    return FilteredComplex(complex_.simplices, complex_.values * eta, complex_.kind, complex_.max_dim,
                           complex_.max_radius * eta, complex_.ambient_dim, complex_.n_vertices)


def check_complex(complex_: FilteredComplex) -> None:
    """Raise ``AssertionError`` unless the complex is face-closed, monotone and sorted."""
    prev = None
    for i, (simplex, value) in enumerate(complex_):
        if list(simplex) != sorted(set(simplex)):
            raise AssertionError(f"simplex {simplex} has unsorted or repeated vertices")
        key = (value, len(simplex), simplex)
        if prev is not None and not prev < key:
            raise AssertionError(f"simplex {simplex} is out of filtration order")
        prev = key
        if len(simplex) > 1:
            for f in (simplex[:k] + simplex[k + 1:] for k in range(len(simplex))):
                if f not in complex_:
                    raise AssertionError(f"face {f} of {simplex} is missing")
                if complex_.value(f) > value:
                    raise AssertionError(f"face {f} enters after its coface {simplex}")


def write_complex(complex_: FilteredComplex, path) -> None:
    """One line per simplex, ``value v0 v1 ... vk``, in filtration order."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# kind={complex_.kind.value} max_dim={complex_.max_dim} "
                 f"max_radius={complex_.max_radius!r} ambient_dim={complex_.ambient_dim} "
                 f"n_vertices={complex_.n_vertices}\n")
        for simplex, value in complex_:
            fh.write(repr(float(value)) + " " + " ".join(map(str, simplex)) + "\n")


def read_complex(path) -> FilteredComplex:
    meta = {"kind": "rips", "max_dim": "0", "max_radius": "inf", "ambient_dim": "0", "n_vertices": "0"}
    items = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for token in line[1:].split():
                    key, _, val = token.partition("=")
                    meta[key] = val
                continue
            value, *verts = line.split()
            items.append((tuple(int(v) for v in verts), float(value)))
    simplices = tuple(s for s, _ in items)
    values = np.array([v for _, v in items], dtype=np.float64)
    return FilteredComplex(simplices, values, ComplexKind.parse(meta["kind"]), int(meta["max_dim"]),
                           float(meta["max_radius"]), int(meta["ambient_dim"]), int(meta["n_vertices"]))

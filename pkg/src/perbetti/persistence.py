"""Persistent homology over F2.

Columns of the boundary matrix are stored as Python integers used as bit
sets (bit ``i`` set <=> simplex ``i`` is a face), so adding two columns over
F2 is a single XOR and the pivot ("lowest one") is ``bit_length() - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .filtration import FilteredComplex

INF = math.inf


class InvalidQueryError(ValueError):
    pass


@dataclass(frozen=True)
class BettiQuery:
    """Homology degree ``q`` and filtration parameters ``r <= s``."""

    q: int
    r: float
    s: float

    def __post_init__(self):
        if self.q < 0:
            raise InvalidQueryError("homology degree must be nonnegative")
        if self.r < 0 or self.s < 0:
            raise InvalidQueryError("filtration parameters must be nonnegative")
        if self.r > self.s:
            raise InvalidQueryError(f"need r <= s, got r={self.r}, s={self.s}")


class BoundaryMatrix:
    """F2 boundary matrix of a filtered complex, columns in filtration order."""

    def __init__(self, columns: Sequence[int], dims: Sequence[int]):
        self.columns = list(columns)
        self.dims = np.asarray(dims, dtype=np.int64)

    @classmethod
    def from_complex(cls, complex_: FilteredComplex) -> "BoundaryMatrix":
        index = complex_._index
        columns = []
        for simplex in complex_.simplices:
            col = 0
            if len(simplex) > 1:
                for k in range(len(simplex)):
                    col |= 1 << index[simplex[:k] + simplex[k + 1:]]
            columns.append(col)
        return cls(columns, complex_.dims)

    def __len__(self) -> int:
        return len(self.columns)

    def faces(self, j: int) -> list[int]:
        col, out = self.columns[j], []
        while col:
            low = col.bit_length() - 1
            out.append(low)
            col ^= 1 << low
        return out[::-1]

    def check_boundary_squared(self) -> None:
        """Raise ``AssertionError`` unless the boundary of every boundary vanishes."""
        for j, col in enumerate(self.columns):
            acc = 0
            for i in self.faces(j):
                acc ^= self.columns[i]
            if acc:
                raise AssertionError(f"boundary of the boundary of column {j} is nonzero")


@dataclass
class Reduction:
    """Reduced columns and the birth/death pairing of column indices."""

    columns: list
    pairs: list  # (birth index, death index)
    essential: list  # birth indices never killed

    def low(self, j: int) -> int:
        col = self.columns[j]
        return col.bit_length() - 1 if col else -1


def reduce(matrix: BoundaryMatrix, clearing: bool = False) -> Reduction:
    """Left-to-right column reduction.

    With ``clearing`` the columns are processed by decreasing dimension and
    every column that becomes a pivot row is zeroed without reduction; the
    pairing is identical.
    """
    cols = list(matrix.columns)
    n = len(cols)
    owner: dict[int, int] = {}
    if clearing and n:
        cleared = bytearray(n)
        order = []
        for d in range(int(matrix.dims.max()), -1, -1):
            order.extend(np.flatnonzero(matrix.dims == d).tolist())
    else:
        cleared = None
        order = range(n)
    for j in order:
        if cleared is not None and cleared[j]:
            cols[j] = 0
            continue
        col = cols[j]
        while col:
            low = col.bit_length() - 1
            k = owner.get(low)
            if k is None:
                break
            col ^= cols[k]
        cols[j] = col
        if col:
            low = col.bit_length() - 1
            owner[low] = j
            if cleared is not None:
                cleared[low] = 1
    pairs = sorted((low, j) for low, j in owner.items())
    killed = set(owner)
    essential = [j for j in range(n) if cols[j] == 0 and j not in killed]
    return Reduction(cols, pairs, essential)


@dataclass(frozen=True)
class PersistencePairs:
    """Full pairing, including zero-persistence pairs and every dimension."""

    dims: np.ndarray
    births: np.ndarray
    deaths: np.ndarray

    def diagram(self, max_degree: int | None = None) -> "PersistenceDiagram":
        keep = self.births < self.deaths
        if max_degree is not None:
            keep &= self.dims <= max_degree
        return PersistenceDiagram(self.dims[keep], self.births[keep], self.deaths[keep])

    def betti(self, q: int, r: float) -> int:
        return int(np.count_nonzero((self.dims == q) & (self.births <= r) & (self.deaths > r)))


def persistence_pairs(complex_: FilteredComplex, clearing: bool = False) -> PersistencePairs:
    red = reduce(BoundaryMatrix.from_complex(complex_), clearing=clearing)
    vals, dims = complex_.values, complex_.dims
    b_idx = [b for b, _ in red.pairs] + red.essential
    d_vals = [float(vals[d]) for _, d in red.pairs] + [INF] * len(red.essential)
    b_idx_arr = np.asarray(b_idx, dtype=np.int64)
    return PersistencePairs(
        dims=dims[b_idx_arr] if len(b_idx) else np.zeros(0, dtype=np.int64),
        births=vals[b_idx_arr] if len(b_idx) else np.zeros(0),
        deaths=np.asarray(d_vals, dtype=np.float64),
    )


class PersistenceDiagram:
    """Multiset of ``(birth, death, dim)`` with ``birth < death``; ``death`` may be ``inf``."""

    __slots__ = ("dims", "births", "deaths")

    def __init__(self, dims, births, deaths):
        dims = np.asarray(dims, dtype=np.int64)
        births = np.asarray(births, dtype=np.float64)
        deaths = np.asarray(deaths, dtype=np.float64)
        if not (dims.shape == births.shape == deaths.shape):
            raise ValueError("dims, births and deaths must have equal length")
        if np.any(births < 0) or np.any(births > deaths):
            raise ValueError("need 0 <= birth <= death for every pair")
        order = np.lexsort((deaths, births, dims))
        self.dims, self.births, self.deaths = dims[order], births[order], deaths[order]

    def __len__(self) -> int:
        return len(self.dims)

    def __iter__(self):
        for q, b, d in zip(self.dims.tolist(), self.births.tolist(), self.deaths.tolist()):
            yield (b, d, q)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PersistenceDiagram):
            return NotImplemented
        return (np.array_equal(self.dims, other.dims) and np.array_equal(self.births, other.births)
                and np.array_equal(self.deaths, other.deaths))

    def __repr__(self) -> str:
        return f"PersistenceDiagram({list(self)})"

    def pairs(self, q: int) -> list[tuple[float, float]]:
        mask = self.dims == q
        return list(zip(self.births[mask].tolist(), self.deaths[mask].tolist()))

    def scaled(self, eta: float) -> "PersistenceDiagram":
        return PersistenceDiagram(self.dims, self.births * eta, self.deaths * eta)

    def allclose(self, other: "PersistenceDiagram", rtol: float = 1e-12, atol: float = 1e-12) -> bool:
        if len(self) != len(other) or not np.array_equal(self.dims, other.dims):
            return False
        fin = np.isfinite(self.deaths)
        if not np.array_equal(fin, np.isfinite(other.deaths)):
            return False
        return bool(np.allclose(self.births, other.births, rtol=rtol, atol=atol)
                    and np.allclose(self.deaths[fin], other.deaths[fin], rtol=rtol, atol=atol))


def diagram(complex_: FilteredComplex, clearing: bool = False) -> PersistenceDiagram:
    """Persistence diagram of the degrees not truncated by the complex's ``max_dim``."""
    return persistence_pairs(complex_, clearing).diagram(complex_.max_homology_degree)


def persistent_betti(diag: PersistenceDiagram, query: BettiQuery) -> int:
    """Number of pairs in degree ``q`` with ``birth <= r`` and ``death > s``."""
    if query.r > query.s:
        raise InvalidQueryError("need r <= s")
    mask = (diag.dims == query.q) & (diag.births <= query.r) & (diag.deaths > query.s)
    return int(np.count_nonzero(mask))


def persistent_betti_many(diag: PersistenceDiagram, queries: Sequence[BettiQuery]) -> list[int]:
    return [persistent_betti(diag, q) for q in queries]


# ---------------------------------------------------------------------------
# rank-based oracle, independent of the reduction above


def f2_rank(matrix: np.ndarray) -> int:
    """Rank over F2 of a 0/1 matrix by Gaussian elimination."""
    a = np.array(matrix, dtype=np.uint8) & 1
    rows, cols = a.shape if a.ndim == 2 else (0, 0)
    rank = 0
    for c in range(cols):
        if rank == rows:
            break
        nz = np.flatnonzero(a[rank:, c])
        if nz.size == 0:
            continue
        piv = rank + nz[0]
        if piv != rank:
            a[[rank, piv]] = a[[piv, rank]]
        below = np.flatnonzero(a[:, c])
        below = below[below != rank]
        if below.size:
            a[below] ^= a[rank]
        rank += 1
    return rank


def _boundary_block(rows: Sequence[tuple], cols: Sequence[tuple]) -> np.ndarray:
    pos = {s: i for i, s in enumerate(rows)}
    out = np.zeros((len(rows), len(cols)), dtype=np.uint8)
    for j, s in enumerate(cols):
        for k in range(len(s)):
            out[pos[s[:k] + s[k + 1:]], j] = 1
    return out


def persistent_betti_direct(complex_: FilteredComplex, query: BettiQuery) -> int:
    """``dim Z_q(K(r)) - dim(B_q(K(s)) ∩ Z_q(K(r)))`` by explicit F2 ranks.

    Does not use the reduction or the diagram.  ``B_q(K(s)) ∩ Z_q(K(r))``
    equals the boundaries supported on ``K(r)``, whose dimension is
    ``rank ∂_{q+1}(s)`` minus the rank of its rows outside ``K(r)``.
    """
    q, r, s = query.q, query.r, query.s
    if q > complex_.max_homology_degree:
        raise InvalidQueryError(f"degree {q} is truncated by max_dim={complex_.max_dim}")

    def simplices(dim, t):
        return [sx for sx, v in complex_ if len(sx) == dim + 1 and v <= t]

    cq_r, cq_s = simplices(q, r), simplices(q, s)
    z_dim = len(cq_r)
    if q > 0 and cq_r:
        z_dim -= f2_rank(_boundary_block(simplices(q - 1, r), cq_r))
    up_s = simplices(q + 1, s)
    if not up_s:
        return z_dim
    d_up = _boundary_block(cq_s, up_s)
    in_r = set(cq_r)
    outside = [i for i, sx in enumerate(cq_s) if sx not in in_r]
    b_cap = f2_rank(d_up) - (f2_rank(d_up[outside]) if outside else 0)
    return z_dim - b_cap


def ordinary_betti_direct(complex_: FilteredComplex, q: int, r: float) -> int:
    return persistent_betti_direct(complex_, BettiQuery(q, r, r))


def euler_characteristic_check(complex_: FilteredComplex, r: float,
                               pairs: PersistencePairs | None = None) -> tuple[int, int]:
    """``(sum (-1)^q beta_q(r), sum (-1)^q #K_q(r))`` from the full pairing."""
    if pairs is None:
        pairs = persistence_pairs(complex_)
    top = int(complex_.dims.max()) if len(complex_) else 0
    lhs = sum((-1) ** q * pairs.betti(q, r) for q in range(top + 1))
    k = int(np.searchsorted(complex_.values, r, side="right"))
    counts = np.bincount(complex_.dims[:k], minlength=top + 1)
    rhs = int(sum((-1) ** q * int(c) for q, c in enumerate(counts)))
    return lhs, rhs


def geometric_lemma_gap(sub: FilteredComplex, sup: FilteredComplex, query: BettiQuery,
                        injection: Sequence[int] | None = None) -> tuple[int, int]:
    """``(|beta(Y) - beta(X)|, added q- and (q+1)-simplices of Y at value <= s)``.

    ``injection[i]`` is the index in ``Y`` of vertex ``i`` of ``X`` (identity
    prefix when omitted).  Both filtrations must come from the same metric.
    """
    n_sub = sub.n_vertices or sum(1 for s in sub.simplices if len(s) == 1)
    n_sup = sup.n_vertices or sum(1 for s in sup.simplices if len(s) == 1)
    if injection is None:
        injection = list(range(n_sub))
    injection = [int(i) for i in injection]
    if len(injection) != n_sub:
        raise ValueError("injection must map every vertex of the sub-cloud")
    if len(set(injection)) != len(injection):
        raise ValueError("index map is not injective")
    if any(i < 0 or i >= n_sup for i in injection):
        raise ValueError("index map points outside the super-cloud")
    q, s = query.q, query.s
    lhs = abs(persistent_betti(diagram(sup), query) - persistent_betti(diagram(sub), query))
    image = {tuple(sorted(injection[v] for v in sx))
             for sx, val in sub if val <= s and len(sx) in (q + 1, q + 2)}
    rhs = sum(1 for sx, val in sup if val <= s and len(sx) in (q + 1, q + 2) and sx not in image)
    return lhs, rhs


# ---------------------------------------------------------------------------
# diagram files


def write_diagram(diag: PersistenceDiagram, path) -> None:
    """CSV with header ``dim,birth,death``; infinite deaths are written as ``inf``."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("dim,birth,death\n")
        for b, d, q in diag:
            fh.write(f"{q},{b!r},{'inf' if math.isinf(d) else repr(d)}\n")


def read_diagram(path) -> PersistenceDiagram:
    dims, births, deaths = [], [], []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "dim,birth,death":
            raise ValueError(f"unexpected diagram header {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            q, b, d = line.split(",")
            dims.append(int(q))
            births.append(float(b))
            deaths.append(float(d))
    return PersistenceDiagram(dims, births, deaths)

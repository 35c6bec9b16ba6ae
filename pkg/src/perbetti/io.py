"""CSV files for point clouds and hidden block paths."""

from __future__ import annotations

import csv
import math

import numpy as np

from .geometry import PointCloud


class CloudFormatError(ValueError):
    pass


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def load_cloud(path, allow_outside_cube: bool = False, dim_p: int | None = None) -> PointCloud:
    """Read one point per row; a non-numeric first row is taken as a header.

    Rows of the wrong arity or coordinates outside ``[0, 1]`` are rejected
    unless ``allow_outside_cube``, in which case every column is min-max
    rescaled into the unit interval.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(tok.strip() for tok in r)]
    if rows and not all(_is_number(tok) for tok in rows[0]):
        header, rows = rows[0], rows[1:]
        dim_p = dim_p or len(header)
    if not rows:
        if dim_p is None:
            raise CloudFormatError("empty cloud file without a header; dimension unknown")
        return PointCloud(np.zeros((0, dim_p)), dim_p=dim_p)
    width = dim_p or len(rows[0])
    data = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise CloudFormatError(f"row {i + 1}: expected {width} columns, got {len(row)}")
        try:
            data[i] = [float(tok) for tok in row]
        except ValueError:
            raise CloudFormatError(f"row {i + 1}: non-numeric entry") from None
    if not np.all(np.isfinite(data)):
        raise CloudFormatError("coordinates must be finite")
    if allow_outside_cube:
        lo, hi = data.min(axis=0), data.max(axis=0)
        span = np.where(hi > lo, hi - lo, 1.0)
        data = (data - lo) / span
    elif data.min() < 0 or data.max() > 1:
        bad = int(np.flatnonzero(np.any((data < 0) | (data > 1), axis=1))[0])
        raise CloudFormatError(f"row {bad + 1}: coordinates outside [0, 1] (use --allow-outside-cube to rescale)")
    return PointCloud(data, dim_p=width)


def save_cloud(cloud: PointCloud, path, header: bool = True) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header:
            fh.write(",".join(f"x{k}" for k in range(cloud.dim_p)) + "\n")
        for row in cloud.points:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def save_hidden_path(path_values, path, sites=None) -> None:
    """Sidecar with one block index per point (plus lattice coordinates for fields)."""
    values = np.asarray(path_values, dtype=np.int64)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if sites is None:
            fh.write("block\n")
            for v in values.tolist():
                fh.write(f"{v}\n")
        else:
            sites = np.asarray(sites, dtype=np.int64)
            fh.write(",".join(f"u{k + 1}" for k in range(sites.shape[1])) + ",block\n")
            for site, v in zip(sites.tolist(), values.tolist()):
                fh.write(",".join(map(str, site)) + f",{v}\n")


def load_hidden_path(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return np.array([int(r[-1]) for r in rows[1:] if r], dtype=np.int64)


def format_float(x: float) -> str:
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)

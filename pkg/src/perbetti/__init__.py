"""Persistent Betti numbers of filtrations built on dependent point processes."""

__version__ = "0.1.0"

from .geometry import Metric, PointCloud, ScalingRegime, pairwise_distances  # noqa: E402
from .filtration import ComplexKind, FilteredComplex, build_cech, build_complex, build_rips  # noqa: E402
from .persistence import BettiQuery, PersistenceDiagram, diagram, persistent_betti  # noqa: E402

__all__ = [
    "BettiQuery",
    "ComplexKind",
    "FilteredComplex",
    "Metric",
    "PersistenceDiagram",
    "PointCloud",
    "ScalingRegime",
    "build_cech",
    "build_complex",
    "build_rips",
    "diagram",
    "pairwise_distances",
    "persistent_betti",
]

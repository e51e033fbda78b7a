"""Unsignalized intersection management for mixed CAV/CHV traffic."""

__version__ = "0.1.0"

from .geometry import (
    ConflictGraph,
    IntersectionModel,
    Movement,
    TrajectoryPath,
    build_intersection,
    compute_conflict_graph,
    entry_area_min_length,
    trajectory_id,
)

__all__ = [
    "ConflictGraph",
    "IntersectionModel",
    "Movement",
    "TrajectoryPath",
    "build_intersection",
    "compute_conflict_graph",
    "entry_area_min_length",
    "trajectory_id",
    "__version__",
]

"""Python bindings for the react formation navigation library."""

from ._reactnav import (
    Trajectory,
    __version__,
    construct_trajectory,
    normalized_formation_error,
    run_scenario,
    solve_assignment,
    structure_with_columns,
)

__all__ = [
    "Trajectory",
    "__version__",
    "construct_trajectory",
    "normalized_formation_error",
    "run_scenario",
    "solve_assignment",
    "structure_with_columns",
]

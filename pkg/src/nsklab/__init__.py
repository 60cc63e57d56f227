"""Numerical laboratory for a viscous capillary compressible flow model.

Simulates the system in primitive and effective-velocity form on a periodic
box and quantitatively audits the energy balances, dyadic-analysis bounds,
weighted-norm growth laws, and level-set iteration certificates that govern
it.
"""

__version__ = "0.1.0"

from .audits import AuditReport
from .fields import (
    FieldError,
    Grid,
    PositivityError,
    ScalarField,
    VectorField,
    make_grid,
)
from .solver import FlowState, SolverConfig, TrajectoryRecord, make_preset, run

__all__ = [
    "__version__",
    "AuditReport",
    "FieldError",
    "PositivityError",
    "Grid",
    "make_grid",
    "ScalarField",
    "VectorField",
    "FlowState",
    "SolverConfig",
    "TrajectoryRecord",
    "make_preset",
    "run",
]

"""Pseudo-spectral laboratory for forced critical SQG and 2D Navier-Stokes on the torus."""

from .diagnostics import Trajectory, TrajectoryRecord, average_convergence, epsilon_estimate
from .integrator import NumericalFailure, SolverConfig, TimeState, simulate, step_nse, step_sqg
from .spectral import Grid, SpectralField, VelocityField, norm

__all__ = [
    "Grid",
    "SpectralField",
    "VelocityField",
    "norm",
    "SolverConfig",
    "TimeState",
    "NumericalFailure",
    "simulate",
    "step_sqg",
    "step_nse",
    "Trajectory",
    "TrajectoryRecord",
    "epsilon_estimate",
    "average_convergence",
]

__version__ = "0.1.0"

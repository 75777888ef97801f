"""Numerical laboratory for NLS/GP soliton relaxation with degenerate neutral modes.

The package covers the whole chain: linear spectra of -Delta + V, nonlinear
bound-state continuation, linearization about the soliton, the matrix Fermi
Golden Rule, the reduced amplitude ODE and full PDE simulation, together with
the measurement of the predicted relaxation rates.
"""

__version__ = "0.1.0"

from .errors import (
    BelowThresholdError,
    BranchRangeError,
    DegeneratePairingError,
    GeometryMismatchError,
    GpLabError,
    IllConditionedProjectionError,
    InvalidParameterError,
    NoConvergenceError,
    OutOfRegimeError,
    SpectralWindowError,
    TrivialSolutionError,
    UnsupportedOrderError,
)
from .model import Nonlinearity, Potential, build_double_well, eval_nonlinearity, eval_potential

__all__ = [
    "BelowThresholdError",
    "BranchRangeError",
    "DegeneratePairingError",
    "GeometryMismatchError",
    "GpLabError",
    "IllConditionedProjectionError",
    "InvalidParameterError",
    "NoConvergenceError",
    "Nonlinearity",
    "OutOfRegimeError",
    "Potential",
    "SpectralWindowError",
    "TrivialSolutionError",
    "UnsupportedOrderError",
    "build_double_well",
    "eval_nonlinearity",
    "eval_potential",
]

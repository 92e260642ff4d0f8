"""High relative accuracy singular values of positive bidiagonal matrices by dqds."""
from .core import BidiagonalInput, InputError, RunStats
from .driver import BudgetExceeded, SolverConfig, compute_singular_values, hdlasq, iteration_budget
from .oracle import bisection_singular_values, verify

__all__ = [
    "BidiagonalInput",
    "BudgetExceeded",
    "InputError",
    "RunStats",
    "SolverConfig",
    "bisection_singular_values",
    "compute_singular_values",
    "hdlasq",
    "iteration_budget",
    "verify",
]

"""Generic concave log-det solver used for every inner convex subproblem."""
from ._backend import BACKEND
from .hermitian import from_vec, to_vec
from .program import (Affine, Concave, LogDetProgram, LogDetTerm, ProgramError,
                      objective_and_gradient)
from .solver import (Infeasible, KernelError, KernelSolution, SolverConfig,
                     phase1_initialize, solve)

__all__ = [
    "BACKEND", "Affine", "Concave", "LogDetProgram", "LogDetTerm", "ProgramError",
    "objective_and_gradient", "Infeasible", "KernelError", "KernelSolution",
    "SolverConfig", "phase1_initialize", "solve", "from_vec", "to_vec",
]

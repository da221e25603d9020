"""Greedy capped nonlinear Kaczmarz solvers, baselines, and benchmarking."""

from .core import (
    Convex,
    IterationRecord,
    MethodKind,
    ProblemInstance,
    Scaled,
    SolveStatus,
    SolveTrace,
    SolverConfig,
    StopDecision,
    check_stop,
)
from .problems import (
    BrownProblem,
    Dataset,
    GLMProblem,
    LinearProblem,
    known_root_check,
    load_libsvm,
    make_glm,
    make_linear,
    make_synthetic_glm,
    parse_libsvm,
)
from .selection import RowGeometry, SelectionKind, SelectionResult
from .solvers import block_step, kaczmarz_step, solve, solve_glm_hybrid

__all__ = [
    "BrownProblem",
    "Convex",
    "Dataset",
    "GLMProblem",
    "IterationRecord",
    "LinearProblem",
    "MethodKind",
    "ProblemInstance",
    "RowGeometry",
    "Scaled",
    "SelectionKind",
    "SelectionResult",
    "SolveStatus",
    "SolveTrace",
    "SolverConfig",
    "StopDecision",
    "block_step",
    "check_stop",
    "kaczmarz_step",
    "known_root_check",
    "load_libsvm",
    "make_glm",
    "make_linear",
    "make_synthetic_glm",
    "parse_libsvm",
    "solve",
    "solve_glm_hybrid",
]

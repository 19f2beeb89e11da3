from .messages import MessageState, Schedule, SolverConfig, evidence_cap, iterate
from .problem import (
    NEG_INF,
    HierarchySolution,
    LayeredProblem,
    NumericalFailure,
    StructuralError,
    ValidationReport,
    objective,
    validate_problem,
)
from .solver import SolveTrace, decode, freeze_next, solve

__all__ = [
    "NEG_INF",
    "HierarchySolution",
    "LayeredProblem",
    "MessageState",
    "NumericalFailure",
    "Schedule",
    "SolveTrace",
    "SolverConfig",
    "StructuralError",
    "ValidationReport",
    "decode",
    "evidence_cap",
    "freeze_next",
    "iterate",
    "objective",
    "solve",
    "validate_problem",
]

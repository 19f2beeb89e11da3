"""Hierarchical affinity propagation: layered exemplar clustering by max-sum message passing."""

from .core import (
    HierarchySolution,
    LayeredProblem,
    MessageState,
    Schedule,
    SolverConfig,
    decode,
    iterate,
    objective,
    solve,
    validate_problem,
)

__version__ = "0.1.0"

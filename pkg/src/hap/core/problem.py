"""Problem instances, decoded hierarchies and the net-similarity objective."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NEG_INF = -np.inf


class StructuralError(ValueError):
    """Raised when array shapes or solution layouts do not match a problem."""


class NumericalFailure(FloatingPointError):
    """Raised when a message sweep produces NaN or +inf."""

    def __init__(self, layer: int, family: str, message: str = ""):
        self.layer = layer
        self.family = family
        super().__init__(message or f"non-finite {family} messages at layer {layer + 1}")


@dataclass(frozen=True)
class LayeredProblem:
    """Per-layer similarities ``s[l, i, j]`` and preferences ``c[l, j]``.

    ``s[l, i, j]`` is how well point ``j`` serves as exemplar of point ``i`` at
    layer ``l`` (0-based internally). ``-inf`` forbids the assignment.
    """

    similarity: np.ndarray
    preference: np.ndarray
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        s = np.array(self.similarity, dtype=float)
        c = np.array(self.preference, dtype=float)
        if s.ndim == 2:
            s = s[None]
        if c.ndim == 1:
            c = c[None]
        if s.ndim != 3 or s.shape[1] != s.shape[2]:
            raise StructuralError(f"similarity must be L x N x N, got {s.shape}")
        if c.shape != s.shape[:2]:
            raise StructuralError(f"preference must be {s.shape[:2]}, got {c.shape}")
        s.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "similarity", s)
        object.__setattr__(self, "preference", c)

    @property
    def num_layers(self) -> int:
        return self.similarity.shape[0]

    @property
    def num_points(self) -> int:
        return self.similarity.shape[1]

    @classmethod
    def build(cls, similarity, preference, num_layers=None, metadata=None, normalize_diagonal=True):
        """Build a problem, broadcasting a single N x N matrix across layers.

        ``preference`` may be a scalar, one value per layer, or an L x N array.
        """
        s = np.asarray(similarity, dtype=float)
        if s.ndim == 2:
            L = num_layers or 1
            s = np.repeat(s[None], L, axis=0)
        L, N = s.shape[0], s.shape[1]
        c = np.asarray(preference, dtype=float)
        if c.ndim == 0:
            c = np.full((L, N), float(c))
        elif c.ndim == 1 and L == 1 and c.shape[0] == N:
            c = c[None]
        elif c.ndim == 1 and c.shape[0] == L:
            c = np.repeat(c[:, None], N, axis=1)
        if normalize_diagonal:
            s = s.copy()
            idx = np.arange(N)
            s[:, idx, idx] = 0.0
        return cls(s, c, metadata=dict(metadata or {}))

    def subproblem(self, layer: int, points) -> "LayeredProblem":
        """Single-layer problem over ``points`` using layer ``layer``'s data."""
        pts = np.asarray(points, dtype=int)
        s = self.similarity[layer][np.ix_(pts, pts)]
        c = self.preference[layer][pts]
        return LayeredProblem(s, c)


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.valid


def validate_problem(problem: LayeredProblem) -> ValidationReport:
    report = ValidationReport()
    s, c = problem.similarity, problem.preference
    for l in range(problem.num_layers):
        diag = np.diagonal(s[l])
        for j in np.flatnonzero(diag != 0.0):
            report.violations.append(f"nonzero diagonal at (l={l + 1},j={j + 1})")
        nan = np.argwhere(np.isnan(s[l]))
        for i, j in nan:
            report.violations.append(f"NaN entry at (l={l + 1},i={i + 1},j={j + 1})")
        pos = np.argwhere(s[l] == np.inf)
        for i, j in pos:
            report.violations.append(f"+inf entry at (l={l + 1},i={i + 1},j={j + 1})")
        for i in np.flatnonzero(~np.isfinite(s[l]).any(axis=1)):
            report.violations.append(f"no finite entry in row (l={l + 1},i={i + 1})")
        for j in np.flatnonzero(~np.isfinite(c[l])):
            report.violations.append(f"non-finite preference at (l={l + 1},j={j + 1})")
    return report


@dataclass
class HierarchySolution:
    """Decoded hierarchy.

    ``assignment[l][i]`` is the exemplar of point ``i`` at layer ``l``, or -1
    when ``i`` is not clustered at that layer. Active and exemplar sets are
    derived from it.
    """

    assignment: list

    def __post_init__(self):
        self.assignment = [np.asarray(a, dtype=int) for a in self.assignment]

    @property
    def num_layers(self) -> int:
        return len(self.assignment)

    @property
    def num_points(self) -> int:
        return len(self.assignment[0]) if self.assignment else 0

    def active(self, layer: int) -> np.ndarray:
        return np.flatnonzero(self.assignment[layer] >= 0)

    def exemplars(self, layer: int) -> np.ndarray:
        a = self.assignment[layer]
        return np.flatnonzero(a == np.arange(len(a)))

    def cluster_counts(self) -> list:
        return [len(self.exemplars(l)) for l in range(self.num_layers)]

    def labels(self, layer: int) -> np.ndarray:
        """Layer-``layer`` cluster label of every original point.

        Assignments are composed upward from layer 0, so every point gets the
        exemplar that its chain of exemplars reaches at ``layer``.
        """
        lab = self.assignment[0].copy()
        for l in range(1, layer + 1):
            lab = self.assignment[l][lab]
        return lab

    def violations(self) -> list:
        out = []
        if not self.assignment:
            return ["no layers"]
        n = self.num_points
        idx = np.arange(n)
        for l, a in enumerate(self.assignment):
            if a.shape != (n,):
                out.append(f"layer {l + 1}: assignment has shape {a.shape}")
                continue
            if np.any(a < -1) or np.any(a >= n):
                out.append(f"layer {l + 1}: assignment index out of range")
                continue
            act = a >= 0
            if l == 0:
                if not act.all():
                    out.append("layer 1: not every point is clustered")
            else:
                prev = self.assignment[l - 1]
                if prev.shape == (n,) and not np.array_equal(act, prev == idx):
                    out.append(f"layer {l + 1}: active set differs from exemplars of layer {l}")
            targets = a[act]
            if targets.size and not np.all(a[targets] == targets):
                out.append(f"layer {l + 1}: point assigned to a non-exemplar")
        return out

    def is_valid(self) -> bool:
        return not self.violations()

    def __eq__(self, other):
        if not isinstance(other, HierarchySolution):
            return NotImplemented
        return len(self.assignment) == len(other.assignment) and all(
            np.array_equal(a, b) for a, b in zip(self.assignment, other.assignment)
        )


def objective(solution: HierarchySolution, problem: LayeredProblem) -> float:
    """Net similarity: chosen similarities plus exemplar preferences.

    Invalid hierarchies score ``-inf``.
    """
    if solution.num_layers != problem.num_layers or solution.num_points != problem.num_points:
        raise StructuralError(
            f"solution is {solution.num_layers}x{solution.num_points}, "
            f"problem is {problem.num_layers}x{problem.num_points}"
        )
    if not solution.is_valid():
        return NEG_INF
    total = 0.0
    for l, a in enumerate(solution.assignment):
        act = np.flatnonzero(a >= 0)
        total += float(problem.similarity[l, act, a[act]].sum())
        total += float(problem.preference[l, solution.exemplars(l)].sum())
    return total

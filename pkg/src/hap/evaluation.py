"""Objective comparisons, exemplar-recovery precision/recall, Rand index, and an exhaustive MAP oracle."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .core import NEG_INF, HierarchySolution, LayeredProblem, StructuralError, objective
from .datagen import GenerationTree

BRUTE_MAX_POINTS = 8
BRUTE_MAX_LAYERS = 3


class OracleTooLarge(ValueError):
    pass


def _levels_to_solution(levels: np.ndarray, s: np.ndarray):
    """Best assignments given how many layers each point stays an exemplar for.

    Returns ``(assignment list, value)`` or ``None`` if some point cannot reach
    any exemplar.
    """
    L, N = s.shape[0], s.shape[1]
    layers = []
    total = 0.0
    active = np.ones(N, dtype=bool)
    for l in range(L):
        ex = np.flatnonzero(levels > l)
        a = np.full(N, -1, dtype=int)
        for i in np.flatnonzero(active):
            if levels[i] > l:
                a[i] = i
                continue
            row = s[l, i, ex]
            k = int(np.argmax(row))
            if row[k] == NEG_INF:
                return None
            a[i] = ex[k]
            total += row[k]
        layers.append(a)
        active = levels > l
    return layers, total


def brute_force_map(problem: LayeredProblem):
    """Exhaustive MAP over every nested exemplar hierarchy.

    For fixed exemplar sets the best assignment of each point is independent,
    so enumerating exemplar levels per point (0..L) covers every optimum.
    Ties go to the lexicographically smallest concatenated assignment.
    """
    L, N = problem.num_layers, problem.num_points
    if N > BRUTE_MAX_POINTS or L > BRUTE_MAX_LAYERS:
        raise OracleTooLarge(f"brute force limited to N<={BRUTE_MAX_POINTS}, L<={BRUTE_MAX_LAYERS}")
    s, c = problem.similarity, problem.preference
    best_val, best_key, best_layers = NEG_INF, None, None
    for combo in itertools.product(range(L + 1), repeat=N):
        levels = np.array(combo)
        if levels.max() < L:
            continue
        res = _levels_to_solution(levels, s)
        if res is None:
            continue
        layers, val = res
        for l in range(L):
            val += c[l, levels > l].sum()
        key = tuple(np.concatenate(layers))
        if val > best_val or (val == best_val and key < best_key):
            best_val, best_key, best_layers = val, key, layers
    return HierarchySolution(best_layers), float(best_val)


@dataclass
class PRPoint:
    precision: float | None
    recall: float
    setting_id: str = ""
    tp: int = 0
    fp: int = 0
    fn: int = 0


def predicted_levels(pred: HierarchySolution) -> np.ndarray:
    """Highest layer (1-based) at which each point is still clustered."""
    lev = np.ones(pred.num_points, dtype=int)
    for l in range(1, pred.num_layers):
        lev[pred.active(l)] = l + 1
    return lev


def precision_recall(pred: HierarchySolution, truth: GenerationTree, setting_id: str = "") -> PRPoint:
    """Exemplar-recovery precision and recall over (point, layer >= 2) pairs.

    A pair is a true positive candidate when the tree generated the point at
    that layer. The prediction marks a point at the highest layer where it is
    still clustered, i.e. where it is absorbed into another exemplar or sits
    at the top.
    """
    if pred.num_points != truth.num_nodes:
        raise StructuralError(f"prediction has {pred.num_points} points, tree has {truth.num_nodes}")
    true_lev = truth.origin_layers()
    pred_lev = predicted_levels(pred)
    t = true_lev >= 2
    p = pred_lev >= 2
    tp = int(np.sum(t & p & (true_lev == pred_lev)))
    npred = int(p.sum())
    ntrue = int(t.sum())
    precision = tp / npred if npred else None
    recall = tp / ntrue if ntrue else 0.0
    return PRPoint(precision, recall, setting_id, tp, npred - tp, ntrue - tp)


def pair_agreement(a: np.ndarray, b: np.ndarray) -> float:
    """Plain Rand index of two labelings from a contingency table."""
    n = len(a)
    if n < 2:
        return 1.0
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)

    def pairs(x):
        return (x * (x - 1) // 2).sum()

    total = n * (n - 1) // 2
    both = pairs(table)
    same_a = pairs(table.sum(axis=1))
    same_b = pairs(table.sum(axis=0))
    agree = total + 2 * both - same_a - same_b
    return float(agree) / total


def rand_index(pred: HierarchySolution, truth, layer: int) -> float:
    """Sibling/non-sibling agreement at ``layer`` (1-based) over all original points.

    ``truth`` may be a GenerationTree or another HierarchySolution.
    """
    truth_sol = truth.to_solution(pred.num_layers) if isinstance(truth, GenerationTree) else truth
    if pred.num_points != truth_sol.num_points:
        raise StructuralError("prediction and truth cover different points")
    if not 1 <= layer <= min(pred.num_layers, truth_sol.num_layers):
        raise StructuralError(f"layer {layer} out of range")
    return pair_agreement(pred.labels(layer - 1), truth_sol.labels(layer - 1))


@dataclass
class RandReport:
    per_layer: list
    mean: float


def rand_report(pred: HierarchySolution, truth, layers=None) -> RandReport:
    layers = layers or range(1, pred.num_layers + 1)
    vals = [rand_index(pred, truth, l) for l in layers]
    return RandReport(vals, float(np.mean(vals)))


def percent_improvement(obj_a: float, obj_b: float) -> float:
    """How much better ``obj_a`` is than the baseline ``obj_b``, in percent of ``|obj_b|``."""
    if obj_a == obj_b:
        return 0.0
    if obj_b == 0.0:
        return np.inf if obj_a > 0 else -np.inf
    return 100.0 * (obj_a - obj_b) / abs(obj_b)


def compare_objectives(solutions, problem: LayeredProblem, baseline: str | None = None):
    """Rows of ``(method, objective, percent improvement over baseline)``, best first.

    The baseline defaults to the first entry. Invalid solutions score -inf and
    get no percentage.
    """
    rows = [(m, objective(sol, problem)) for m, sol in solutions]
    base_id = baseline if baseline is not None else rows[0][0]
    base = dict(rows)[base_id]
    table = []
    for m, val in rows:
        pct = None
        if np.isfinite(val) and np.isfinite(base):
            pct = percent_improvement(val, base)
        table.append((m, val, pct))
    table.sort(key=lambda r: -r[1])
    return table

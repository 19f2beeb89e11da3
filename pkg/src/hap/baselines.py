"""Comparison methods: layer-by-layer AP, hierarchical k-medians and hierarchical k-means."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import HierarchySolution, LayeredProblem, SolverConfig, StructuralError, solve


@dataclass
class PointCloud:
    coords: np.ndarray

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=float)
        if self.coords.ndim != 2:
            raise StructuralError("coords must be an n x D array")
        if not np.isfinite(self.coords).all():
            raise StructuralError("coords must be finite")

    @classmethod
    def from_tree(cls, tree, alphabet_size: int = 4) -> "PointCloud":
        """2D payloads as-is; sequences one-hot encoded per position."""
        if tree.kind == "2d":
            return cls(tree.payload)
        seqs = np.asarray(tree.payload, dtype=int)
        onehot = np.eye(alphabet_size)[seqs]
        return cls(onehot.reshape(len(seqs), -1))


def check_k(k, n: int) -> list:
    k = [int(x) for x in k]
    if not k or k[0] > n or min(k) < 1 or any(b > a for a, b in zip(k, k[1:])):
        raise StructuralError(f"infeasible clusters per layer {k} for {n} points")
    return k


def _assemble(n, layer_maps):
    """Turn per-layer (candidates, local assignment) pairs into a HierarchySolution."""
    layers = []
    for cands, local in layer_maps:
        a = np.full(n, -1, dtype=int)
        a[cands] = cands[local]
        layers.append(a)
    return HierarchySolution(layers)


def greedy_hap(problem: LayeredProblem, config: SolverConfig | None = None) -> HierarchySolution:
    """Flat AP on each layer, run on the exemplars found by the layer below."""
    return greedy_hap_traced(problem, config)[0]


def greedy_hap_traced(problem: LayeredProblem, config: SolverConfig | None = None):
    """Like :func:`greedy_hap` but also returns the per-layer solve traces."""
    config = config or SolverConfig()
    n = problem.num_points
    cands = np.arange(n)
    maps, traces = [], []
    for l in range(problem.num_layers):
        sub = problem.subproblem(l, cands)
        sol, trace = solve(sub, config)
        traces.append(trace)
        local = sol.assignment[0]
        maps.append((cands, local))
        cands = cands[np.flatnonzero(local == np.arange(len(cands)))]
    return _assemble(n, maps), traces


def _nearest(dist, centers):
    """Assign every row to its closest center; centers keep themselves."""
    d = dist[:, centers]
    lab = np.argmin(d, axis=1)
    lab[centers] = np.arange(len(centers))
    return lab, d[np.arange(len(d)), lab]


def k_medians(dist: np.ndarray, k: int, rng, max_iter: int = 100):
    """Alternating medoid local search from a random start.

    Returns ``(medoids, labels, cost_history)``.
    """
    n = len(dist)
    med = np.sort(rng.choice(n, size=k, replace=False))
    history = []
    for _ in range(max_iter):
        lab, d = _nearest(dist, med)
        history.append(float(d.sum()))
        new = med.copy()
        for c in range(k):
            members = np.flatnonzero(lab == c)
            within = dist[np.ix_(members, members)].sum(axis=0)
            new[c] = members[np.argmin(within)]
        if np.array_equal(new, med):
            break
        med = new
        lab, d = _nearest(dist, med)
        history.append(float(d.sum()))
    return med, lab, history


def hk_medians(problem: LayeredProblem, k, restarts: int = 100, seed: int = 0) -> HierarchySolution:
    """Hierarchical k-medians on ``-s``: medoids of each layer are clustered at the next."""
    n = problem.num_points
    k = check_k(k, n)
    if len(k) != problem.num_layers:
        raise StructuralError(f"need {problem.num_layers} cluster counts, got {len(k)}")
    rng = np.random.default_rng(seed)
    cands = np.arange(n)
    maps = []
    for l, kl in enumerate(k):
        if kl > len(cands):
            raise StructuralError(f"layer {l + 1}: k={kl} exceeds {len(cands)} active points")
        dist = -problem.similarity[l][np.ix_(cands, cands)]
        best = None
        for _ in range(restarts):
            med, lab, hist = k_medians(dist, kl, rng)
            if best is None or hist[-1] < best[0]:
                best = (hist[-1], med, lab)
        _, med, lab = best
        local = med[lab]
        maps.append((cands, local))
        cands = cands[med]
    return _assemble(n, maps)


def lloyd(x: np.ndarray, k: int, rng, max_iter: int = 300):
    """Squared-Euclidean k-means from ``k`` distinct random points.

    An emptied cluster is re-seeded at the point farthest from its current
    center. Returns ``(centers, labels, cost_history)``.
    """
    n = len(x)
    centers = x[rng.choice(n, size=k, replace=False)].copy()
    history = []
    lab = None
    for _ in range(max_iter):
        d2 = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(-1)
        new_lab = np.argmin(d2, axis=1)
        history.append(float(d2[np.arange(n), new_lab].sum()))
        if lab is not None and np.array_equal(new_lab, lab):
            break
        lab = new_lab
        for c in range(k):
            members = lab == c
            if members.any():
                centers[c] = x[members].mean(axis=0)
            else:
                far = int(np.argmax(d2[np.arange(n), lab]))
                centers[c] = x[far]
                lab[far] = c
                d2[far] = 0.0
    return centers, lab, history


def hk_means(cloud: PointCloud, k, restarts: int = 100, seed: int = 0) -> HierarchySolution:
    """Hierarchical k-means; each layer's means are snapped to their nearest data point."""
    x = cloud.coords
    n = len(x)
    k = check_k(k, n)
    rng = np.random.default_rng(seed)
    cands = np.arange(n)
    maps = []
    for l, kl in enumerate(k):
        if kl > len(cands):
            raise StructuralError(f"layer {l + 1}: k={kl} exceeds {len(cands)} active points")
        xs = x[cands]
        best = None
        for _ in range(restarts):
            centers, lab, hist = lloyd(xs, kl, rng)
            if best is None or hist[-1] < best[0]:
                best = (hist[-1], centers, lab)
        _, centers, lab = best
        d2 = ((centers[:, None, :] - xs[None, :, :]) ** 2).sum(-1)
        snap = np.argmin(d2, axis=1)
        local = snap[lab]
        local[snap] = snap
        maps.append((cands, local))
        cands = cands[np.unique(snap)]
    return _assemble(n, maps)

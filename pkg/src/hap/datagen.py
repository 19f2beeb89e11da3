"""Synthetic hierarchies with ground truth: 2D Gaussian trees and evolving sequences."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .core import HierarchySolution, LayeredProblem

ALPHABET = "ACGT"
RNG_NAME = "numpy.random.PCG64"


class PayloadMismatch(TypeError):
    pass


@dataclass
class GenerationTree:
    """Generated points with parent links.

    ``origin[i]`` is the 1-based layer the node was generated at, counting
    from the bottom: the deepest generation is layer 1, roots sit at the top.
    ``kind`` is ``"2d"`` (payload is an ``n x 2`` float array) or ``"seq"``
    (an ``n x length`` array of symbol codes).
    """

    parent: np.ndarray
    origin: np.ndarray
    payload: np.ndarray
    kind: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.parent = np.asarray(self.parent, dtype=int)
        self.origin = np.asarray(self.origin, dtype=int)
        self.payload = np.asarray(self.payload)

    @property
    def num_nodes(self) -> int:
        return len(self.parent)

    @property
    def depth(self) -> int:
        return int(self.origin.max())

    @property
    def root_count(self) -> int:
        return int(np.sum(self.parent < 0))

    def origin_layers(self) -> np.ndarray:
        return self.origin.copy()

    def layer_sizes(self) -> list:
        """Number of nodes generated at each layer, bottom first."""
        return [int(np.sum(self.origin == l)) for l in range(1, self.depth + 1)]

    def violations(self) -> list:
        out = []
        top = self.depth
        for i, (p, o) in enumerate(zip(self.parent, self.origin)):
            if p < 0:
                if o != top:
                    out.append(f"root {i} is not at the top layer")
            elif self.origin[p] != o + 1:
                out.append(f"node {i} at layer {o} has parent at layer {self.origin[p]}")
        return out

    def to_solution(self, num_layers: int | None = None) -> HierarchySolution:
        """Ground-truth hierarchy: a node stays its own exemplar below its origin layer and joins its parent there."""
        L = num_layers or self.depth
        n = self.num_nodes
        idx = np.arange(n)
        layers = []
        for l in range(1, L + 1):
            a = np.full(n, -1, dtype=int)
            act = self.origin >= l
            a[act] = idx[act]
            joins = (self.origin == l) & (self.parent >= 0)
            a[joins] = self.parent[joins]
            layers.append(a)
        return HierarchySolution(layers)

    def sequences(self) -> list:
        if self.kind != "seq":
            raise PayloadMismatch("tree does not carry sequences")
        return ["".join(ALPHABET[k] for k in row) for row in self.payload]


@dataclass
class Gen2DConfig:
    total_points: int = 200
    num_layers: int = 4
    top_std: float = 3.0
    std_divisor: float = 2.0
    branching: int = 2
    rng_seed: int = 0

    def __post_init__(self):
        if self.num_layers < 1 or self.total_points < 1:
            raise ValueError("num_layers and total_points must be positive")

    def layer_counts(self) -> list:
        """Node counts from the top layer down; each layer has ``branching`` times the one above."""
        L, b = self.num_layers, self.branching
        unit = sum(b**d for d in range(L))
        top = max(1, int(round(self.total_points / unit)))
        return [top * b**d for d in range(L)]


@dataclass
class GenSeqConfig:
    alphabet_size: int = 4
    seq_length: int = 40
    generations: int = 4
    children_mean: float = 10.0
    mutations_mean: float = 3.0
    max_children: int = 50
    rng_seed: int = 0

    def __post_init__(self):
        if min(self.alphabet_size, self.seq_length, self.generations, self.max_children) < 1:
            raise ValueError("sequence generator parameters must be positive")
        if self.children_mean < 1 or self.mutations_mean <= 0 or self.alphabet_size < 2:
            raise ValueError("children_mean must be >= 1, mutations_mean > 0, alphabet >= 2")


def truncated_geometric(rng, p: float, low: int, high: int) -> int:
    """Geometric on ``low, low+1, ...`` with success probability ``p``, conditioned on ``<= high``."""
    while True:
        k = int(rng.geometric(p)) - 1 + low
        if k <= high:
            return k


def gen_2d(config: Gen2DConfig) -> GenerationTree:
    rng = np.random.default_rng(config.rng_seed)
    counts = config.layer_counts()
    L = config.num_layers
    pts, parent, origin = [], [], []
    prev = None
    for d, n in enumerate(counts):
        std = config.top_std / config.std_divisor**d
        layer = L - d
        if prev is None:
            xy = rng.normal(0.0, std, size=(n, 2))
            par = np.full(n, -1)
        else:
            par = prev[rng.integers(0, len(prev), size=n)]
            base = np.concatenate(pts)[par]
            xy = base + rng.normal(0.0, std, size=(n, 2))
        first = sum(len(p) for p in pts)
        pts.append(xy)
        parent.append(par)
        origin.append(np.full(n, layer))
        prev = np.arange(first, first + n)
    meta = {"generator": "2d", "config": asdict(config), "rng": RNG_NAME}
    return GenerationTree(np.concatenate(parent), np.concatenate(origin), np.concatenate(pts), "2d", meta)


def gen_sequences(config: GenSeqConfig) -> GenerationTree:
    rng = np.random.default_rng(config.rng_seed)
    G, n, A = config.generations, config.seq_length, config.alphabet_size
    p_child = 1.0 / config.children_mean
    p_mut = 1.0 / (config.mutations_mean + 1.0)
    seqs = [rng.integers(0, A, size=n)]
    parent, origin = [-1], [G]
    frontier = [0]
    for d in range(1, G):
        nxt = []
        for node in frontier:
            for _ in range(truncated_geometric(rng, p_child, 1, config.max_children)):
                m = truncated_geometric(rng, p_mut, 0, n)
                child = seqs[node].copy()
                pos = rng.choice(n, size=m, replace=False)
                child[pos] = (child[pos] + rng.integers(1, A, size=m)) % A
                seqs.append(child)
                parent.append(node)
                origin.append(G - d)
                nxt.append(len(seqs) - 1)
        frontier = nxt
    meta = {"generator": "seq", "config": asdict(config), "rng": RNG_NAME}
    return GenerationTree(np.array(parent), np.array(origin), np.array(seqs, dtype=np.int8), "seq", meta)


def _prefs(preferences, L, N):
    c = np.asarray(preferences, dtype=float)
    if c.ndim == 0:
        return np.full((L, N), float(c))
    if c.ndim == 1:
        if c.shape[0] != L:
            raise ValueError(f"need {L} per-layer preferences, got {c.shape[0]}")
        return np.repeat(c[:, None], N, axis=1)
    return c


def problem_from_2d(tree: GenerationTree, layers: int, preferences, squared: bool = True) -> LayeredProblem:
    """Layer-independent similarities ``-||x_i - x_j||^2`` (or unsquared)."""
    if tree.kind != "2d":
        raise PayloadMismatch("expected a 2D tree")
    x = tree.payload.astype(float)
    d2 = ((x[:, None, :] - x[None, :, :]) ** 2).sum(-1)
    s = -d2 if squared else -np.sqrt(d2)
    np.fill_diagonal(s, 0.0)
    s = np.repeat(s[None], layers, axis=0)
    return LayeredProblem(s, _prefs(preferences, layers, tree.num_nodes),
                          metadata={"source": tree.metadata, "similarity": "neg_sq_euclid" if squared else "neg_euclid"})


def mutation_log_pmf(k, mean: float = 3.0, max_count: int = 40):
    """Log pmf of the mutation-count model: geometric on 0..max_count with the given untruncated mean."""
    p = 1.0 / (mean + 1.0)
    log_z = np.log1p(-((1.0 - p) ** (max_count + 1)))
    return np.log(p) + np.asarray(k) * np.log1p(-p) - log_z


def hamming_matrix(seqs: np.ndarray) -> np.ndarray:
    seqs = np.asarray(seqs)
    return (seqs[:, None, :] != seqs[None, :, :]).sum(-1)


def problem_from_sequences(tree: GenerationTree, layers: int, preferences,
                           mutations_mean: float = 3.0) -> LayeredProblem:
    if tree.kind != "seq":
        raise PayloadMismatch("expected a sequence tree")
    h = hamming_matrix(tree.payload)
    s = mutation_log_pmf(h, mutations_mean, tree.payload.shape[1])
    np.fill_diagonal(s, 0.0)
    s = np.repeat(s[None], layers, axis=0)
    return LayeredProblem(s, _prefs(preferences, layers, tree.num_nodes),
                          metadata={"source": tree.metadata, "similarity": "log_mutation_pmf"})


def random_layer_preferences(rng, num_layers: int, low: float, high: float) -> np.ndarray:
    """Per-layer preferences drawn from ``[low, high]``, decreasing with the layer index."""
    return np.sort(rng.uniform(low, high, size=num_layers))[::-1]


def similarity_scale(problem: LayeredProblem) -> float:
    """Median magnitude of the finite off-diagonal similarities of the bottom layer."""
    s = problem.similarity[0]
    off = s[~np.eye(len(s), dtype=bool)]
    off = off[np.isfinite(off)]
    return float(np.median(np.abs(off))) if off.size else 1.0

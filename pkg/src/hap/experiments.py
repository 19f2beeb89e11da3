"""Experiment protocols shared by the scripts and the acceptance suite.

Each protocol is a dataclass config plus a ``run_*`` function returning plain
per-run records, so results can be tabulated, written to CSV or asserted on.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .baselines import greedy_hap, hk_medians
from .core import LayeredProblem, SolverConfig, objective, solve
from .datagen import (
    Gen2DConfig,
    GenSeqConfig,
    gen_2d,
    gen_sequences,
    problem_from_2d,
    problem_from_sequences,
    random_layer_preferences,
    similarity_scale,
)
from .evaluation import percent_improvement, rand_index

# settings that worked well across both synthetic families
HAP_CONFIG = SolverConfig(damping=0.8, schedule="fix_bottom", fix_period=500, max_iterations=3000)
RESTART_CONFIG = SolverConfig(damping=0.5, schedule="fix_bottom", fix_period=500, max_iterations=3000)


def _run_hap(problem, configs):
    """Best objective over several HAP runs; returns ``(solution, value, converged, seconds)``."""
    best = None
    t0 = time.perf_counter()
    for cfg in configs:
        sol, trace = solve(problem, cfg)
        value = objective(sol, problem)
        if best is None or value > best[1]:
            best = (sol, value, trace.converged)
    return (*best, time.perf_counter() - t0)


@dataclass
class Compare2DConfig:
    seeds: tuple = tuple(range(20))
    num_layers: int = 4
    total_points: int = 200
    # preference magnitudes as a fraction of the median |similarity|
    pref_low: float = 0.01
    pref_high: float = 1.0
    hap_configs: tuple = (HAP_CONFIG, RESTART_CONFIG)
    greedy_config: SolverConfig = field(default_factory=SolverConfig)


def run_2d_comparison(cfg: Compare2DConfig, progress=None) -> list:
    """HAP (best of its configs) against greedy layer-wise AP on generated 2D trees."""
    records = []
    for seed in cfg.seeds:
        tree = gen_2d(Gen2DConfig(total_points=cfg.total_points, num_layers=cfg.num_layers, rng_seed=seed))
        scale = similarity_scale(problem_from_2d(tree, cfg.num_layers, 0.0))
        rng = np.random.default_rng([seed, 1])
        c = random_layer_preferences(rng, cfg.num_layers, -cfg.pref_high * scale, -cfg.pref_low * scale)
        problem = problem_from_2d(tree, cfg.num_layers, c)
        h, oh, conv, th = _run_hap(problem, cfg.hap_configs)
        t0 = time.perf_counter()
        g = greedy_hap(problem, cfg.greedy_config)
        tg = time.perf_counter() - t0
        og = objective(g, problem)
        rec = {
            "seed": seed, "n": problem.num_points, "layers": cfg.num_layers, "preferences": c.tolist(),
            "objective_hap": oh, "objective_greedy": og, "improvement": percent_improvement(oh, og),
            "counts_hap": h.cluster_counts(), "counts_greedy": g.cluster_counts(),
            "converged": conv, "time_hap": th, "time_greedy": tg,
        }
        records.append(rec)
        if progress:
            progress(rec)
    return records


@dataclass
class SeqRecoveryConfig:
    num_trees: int = 10
    generations: int = 3
    min_size: int = 100
    max_size: int = 300
    settings_per_tree: int = 10
    # absolute preference range; sequence similarities are log-probabilities
    pref_low: float = -6.0
    pref_high: float = -0.5
    hap_config: SolverConfig = HAP_CONFIG
    greedy_config: SolverConfig = field(default_factory=SolverConfig)
    hkmc_restarts: int = 100
    first_seed: int = 0


def sequence_trees(cfg: SeqRecoveryConfig) -> list:
    """The first ``num_trees`` generated trees, by seed, whose size is within bounds."""
    trees = []
    seed = cfg.first_seed
    while len(trees) < cfg.num_trees:
        tree = gen_sequences(GenSeqConfig(generations=cfg.generations, rng_seed=seed))
        if cfg.min_size <= tree.num_nodes <= cfg.max_size:
            trees.append((seed, tree))
        seed += 1
    return trees


def mean_rand(sol, tree, layers) -> float:
    return float(np.mean([rand_index(sol, tree, l) for l in range(1, layers + 1)]))


def single_top_ancestor(sol, tree) -> bool:
    """Whether the top layer holds exactly the tree's root(s)."""
    roots = np.flatnonzero(tree.parent < 0)
    return bool(np.array_equal(sol.exemplars(sol.num_layers - 1), roots))


def run_sequence_recovery(cfg: SeqRecoveryConfig, progress=None) -> list:
    """HAP, greedy and HKMC (given HAP's cluster counts) on a preference sweep per tree."""
    records = []
    L = cfg.generations
    for seed, tree in sequence_trees(cfg):
        rng = np.random.default_rng([seed, 2])
        for k in range(cfg.settings_per_tree):
            c = random_layer_preferences(rng, L, cfg.pref_low, cfg.pref_high)
            problem = problem_from_sequences(tree, L, c)
            h, oh, conv, th = _run_hap(problem, (cfg.hap_config,))
            g = greedy_hap(problem, cfg.greedy_config)
            m = hk_medians(problem, h.cluster_counts(), cfg.hkmc_restarts, seed=seed)
            rec = {
                "tree_seed": seed, "setting": k, "n": tree.num_nodes, "preferences": c.tolist(),
                "rand_hap": mean_rand(h, tree, L), "rand_greedy": mean_rand(g, tree, L),
                "rand_hkmc": mean_rand(m, tree, L),
                "single_hap": single_top_ancestor(h, tree), "single_greedy": single_top_ancestor(g, tree),
                "objective_hap": oh, "objective_greedy": objective(g, problem),
                "objective_hkmc": objective(m, problem),
                "counts_hap": h.cluster_counts(), "counts_greedy": g.cluster_counts(),
                "converged": conv, "time_hap": th,
            }
            records.append(rec)
            if progress:
                progress(rec)
    return records


def top_preference_sweep(problem: LayeredProblem, top_values, hap_config: SolverConfig = HAP_CONFIG,
                         greedy_config: SolverConfig | None = None) -> list:
    """Cluster counts of HAP and greedy while only the top layer's preference changes."""
    rows = []
    for v in top_values:
        c = problem.preference.copy()
        c[-1] = v
        p = LayeredProblem(problem.similarity, c)
        h, _ = solve(p, hap_config)
        g = greedy_hap(p, greedy_config or SolverConfig())
        rows.append({"top_preference": float(v), "counts_hap": h.cluster_counts(),
                     "counts_greedy": g.cluster_counts()})
    return rows

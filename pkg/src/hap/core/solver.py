"""Decoding message states into hierarchies and the iterate-until-stable driver."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .messages import (
    MessageState,
    Schedule,
    SolverConfig,
    clamp_rows,
    evidence_cap,
    frozen_tau,
    iterate,
)
from .problem import NEG_INF, HierarchySolution, LayeredProblem, objective, validate_problem

log = logging.getLogger(__name__)

_TINY = np.finfo(float).min


def _decode_layer(belief: np.ndarray, s: np.ndarray, cands: np.ndarray) -> np.ndarray:
    n = s.shape[0]
    out = np.full(n, -1, dtype=int)
    sub = belief[np.ix_(cands, cands)]
    finite = np.isfinite(s[np.ix_(cands, cands)])
    # reachable-but-disfavoured entries still beat forbidden ones
    sub = np.where(np.isfinite(sub), sub, np.where(finite, _TINY, NEG_INF))
    is_ex = np.argmax(sub, axis=1) == np.arange(len(cands))
    diag = np.diagonal(sub)

    while True:
        ex = np.flatnonzero(is_ex)
        if ex.size:
            scores = sub[:, ex]
            best = np.argmax(scores, axis=1)
            orphan = ~is_ex & ~finite[:, ex].any(axis=1)
        else:
            orphan = ~is_ex
        if not orphan.any():
            break
        # promote the orphan that most wants to be an exemplar
        cand_orph = np.flatnonzero(orphan)
        is_ex[cand_orph[np.argmax(diag[cand_orph])]] = True

    for local in range(len(cands)):
        out[cands[local]] = cands[local] if is_ex[local] else cands[ex[best[local]]]
    return out


def decode(state: MessageState, problem: LayeredProblem) -> HierarchySolution:
    """Bottom-up argmax decoding of ``alpha + s``, restricted to each layer's candidates.

    Frozen layers reuse their fixed assignments. Candidates left without any
    reachable exemplar are promoted, so the result is always valid.
    """
    state.check_shape(problem)
    N = problem.num_points
    layers = []
    cands = np.arange(N)
    for l in range(problem.num_layers):
        if l < state.frozen_below:
            a = np.asarray(state.fixed[l], dtype=int)
        else:
            belief = state.alpha[l] + problem.similarity[l]
            a = _decode_layer(belief, problem.similarity[l], cands)
        layers.append(a)
        cands = np.flatnonzero(a == np.arange(N))
    return HierarchySolution(layers)


@dataclass
class SolveTrace:
    objectives: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    frozen_at: list = field(default_factory=list)
    state: MessageState | None = None

    def summary(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "frozen_at": list(self.frozen_at),
            "final_objective": self.objectives[-1] if self.objectives else None,
        }


def jittered(problem: LayeredProblem, seed: int, scale: float = 1e-12) -> LayeredProblem:
    """Copy of ``problem`` with tiny seeded noise on finite off-diagonal similarities."""
    rng = np.random.default_rng(seed)
    s = problem.similarity.copy()
    finite = np.isfinite(s)
    mag = np.abs(s[finite]).max() if finite.any() else 1.0
    noise = rng.random(s.shape) * scale * max(mag, 1.0)
    idx = np.arange(problem.num_points)
    noise[:, idx, idx] = 0.0
    s[finite] += noise[finite]
    return LayeredProblem(s, problem.preference, metadata=problem.metadata)


def _exemplar_key(sol: HierarchySolution):
    return tuple(tuple(sol.exemplars(l)) for l in range(sol.num_layers))


def freeze_next(state: MessageState, problem: LayeredProblem, cap: float, solution=None):
    """Fix the lowest unfixed layer at its currently decoded assignment."""
    f = state.frozen_below
    if solution is None:
        solution = decode(state, problem)
    a = solution.assignment[f].copy()
    state.fixed.append(a)
    state.rho[f] = clamp_rows(a)
    if f + 1 < problem.num_layers:
        state.tau[f + 1] = frozen_tau(a, cap)
    state.frozen_below = f + 1


def _track_best(state, sol, value):
    if value > state.best_objective:
        state.best, state.best_objective = sol, value


def solve(problem: LayeredProblem, config: SolverConfig | None = None, state: MessageState | None = None):
    """Iterate until decoded exemplar sets are stable (or every layer is fixed).

    Every sweep is decoded. With ``config.keep_best`` the returned hierarchy is
    the best one decoded so far, which matters when the messages oscillate;
    otherwise it is the final decode. Returns ``(solution, trace)``;
    ``trace.state`` holds the messages and can be passed back in to resume.
    """
    config = config or SolverConfig()
    report = validate_problem(problem)
    if not report.valid:
        raise ValueError("invalid problem: " + "; ".join(report.violations[:5]))
    work = jittered(problem, config.rng_seed) if config.jitter else problem
    cap = evidence_cap(work)
    state = MessageState.zeros(problem) if state is None else state
    state.check_shape(problem)
    trace = SolveTrace(state=state)

    sol = decode(state, work)
    _track_best(state, sol, objective(sol, problem))
    key = _exemplar_key(sol)
    period_best = (sol, objective(sol, problem))
    streak = 0
    since_fix = 0
    fixing = config.schedule is Schedule.FIX_BOTTOM
    L = problem.num_layers
    if fixing and state.frozen_below >= L:
        trace.converged = True

    for _ in range(config.max_iterations):
        if trace.converged:
            break
        iterate(state, work, config, cap)
        trace.iterations += 1
        since_fix += 1
        sol = decode(state, work)
        value = objective(sol, problem)
        trace.objectives.append(value)
        _track_best(state, sol, value)
        if value > period_best[1]:
            period_best = (sol, value)
        new_key = _exemplar_key(sol)
        streak = streak + 1 if new_key == key else 0
        key = new_key
        if fixing:
            if since_fix >= config.fix_period or streak >= config.convergence_window:
                # fix from the best hierarchy of this period, not the last oscillation
                freeze_next(state, work, cap, period_best[0])
                trace.frozen_at.append(state.iteration)
                since_fix = 0
                streak = 0
                period_best = (None, NEG_INF)
                if state.frozen_below >= L:
                    trace.converged = True
        elif streak >= config.convergence_window:
            trace.converged = True

    if not trace.converged:
        log.info("HAP stopped after %d iterations without converging", trace.iterations)
    if config.keep_best:
        return state.best, trace
    return decode(state, work), trace

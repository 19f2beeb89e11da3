"""Max-sum message updates for the layered exemplar model.

Arrays are indexed ``[layer, i, j]`` with layer 0 at the bottom. ``tau[l]`` is
the upward message into layer ``l`` (``tau[0]`` unused) and ``phi[l]`` the
downward message into layer ``l`` (``phi[L-1]`` unused).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .problem import NEG_INF, LayeredProblem, NumericalFailure, StructuralError


class Schedule(str, enum.Enum):
    PLAIN = "plain"
    FIX_BOTTOM = "fix_bottom"


@dataclass
class SolverConfig:
    damping: float = 0.5
    max_iterations: int = 2000
    convergence_window: int = 50
    schedule: Schedule = Schedule.PLAIN
    fix_period: int = 500
    rng_seed: int = 0
    jitter: bool = False
    keep_best: bool = True

    def __post_init__(self):
        self.schedule = Schedule(self.schedule)
        if not 0.0 <= self.damping < 1.0:
            raise ValueError(f"damping must be in [0, 1), got {self.damping}")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.convergence_window < 1 or self.fix_period < 1:
            raise ValueError("convergence_window and fix_period must be >= 1")


@dataclass
class MessageState:
    rho: np.ndarray
    alpha: np.ndarray
    tau: np.ndarray
    phi: np.ndarray
    iteration: int = 0
    frozen_below: int = 0
    # decoded assignment of each frozen layer, bottom first
    fixed: list = field(default_factory=list)
    # best decoded hierarchy seen so far and its objective
    best: object = None
    best_objective: float = -np.inf

    @classmethod
    def zeros(cls, problem: LayeredProblem) -> "MessageState":
        L, N = problem.num_layers, problem.num_points
        return cls(
            rho=np.zeros((L, N, N)),
            alpha=np.zeros((L, N, N)),
            tau=np.zeros((L, N)),
            phi=np.zeros((L, N)),
        )

    def copy(self) -> "MessageState":
        return MessageState(
            self.rho.copy(), self.alpha.copy(), self.tau.copy(), self.phi.copy(),
            self.iteration, self.frozen_below, [a.copy() for a in self.fixed],
            self.best, self.best_objective,
        )

    def check_shape(self, problem: LayeredProblem):
        L, N = problem.num_layers, problem.num_points
        for name, arr, shape in (
            ("rho", self.rho, (L, N, N)),
            ("alpha", self.alpha, (L, N, N)),
            ("tau", self.tau, (L, N)),
            ("phi", self.phi, (L, N)),
        ):
            if arr.shape != shape:
                raise StructuralError(f"{name} has shape {arr.shape}, expected {shape}")


def evidence_cap(problem: LayeredProblem) -> float:
    """A finite stand-in for +inf evidence.

    It exceeds the spread of any two configurations' objectives, so clipping
    messages to it never changes which configuration a max prefers.
    """
    s = problem.similarity
    finite = np.abs(s[np.isfinite(s)]).sum()
    return 1.0 + 2.0 * (finite + np.abs(problem.preference).sum())


def competing_max(scores: np.ndarray) -> np.ndarray:
    """``out[i, j] = max_{k != j} scores[i, k]`` via the top-two trick."""
    n = scores.shape[1]
    rows = np.arange(scores.shape[0])
    best = np.argmax(scores, axis=1)
    first = scores[rows, best]
    work = scores.copy()
    work[rows, best] = NEG_INF
    second = work.max(axis=1) if n > 1 else np.full(scores.shape[0], NEG_INF)
    out = np.repeat(first[:, None], n, axis=1)
    out[rows, best] = second
    return out


def _damp(old, new, lam):
    if lam == 0.0:
        return new
    return lam * old + (1.0 - lam) * new


def _check(arr, layer, family):
    if np.isnan(arr).any() or (arr == np.inf).any():
        raise NumericalFailure(layer, family)


def responsibilities(s, alpha, tau_in, cap):
    """New responsibilities for one layer.

    ``tau_in`` is None at the bottom layer, which gives the flat update.
    """
    mx = competing_max(alpha + s)
    if tau_in is None:
        rho = s - mx
    else:
        rho = s + np.minimum(tau_in[:, None], -mx)
    return np.minimum(rho, cap)


def column_support(rho):
    """Diagonal of ``rho`` and column sums of ``max(0, rho)`` off the diagonal."""
    n = rho.shape[0]
    pos = np.maximum(rho, 0.0)
    pos[np.arange(n), np.arange(n)] = 0.0
    return pos, np.diagonal(rho).copy(), pos.sum(axis=0)


def availabilities(rho, pref):
    """New availabilities for one layer given effective preferences ``pref``."""
    pos, d, off = column_support(rho)
    alpha = np.minimum(0.0, (pref + d + off)[None, :] - pos)
    n = rho.shape[0]
    alpha[np.arange(n), np.arange(n)] = pref + off
    return alpha


def upward(rho, pref):
    """Message from layer ``l``'s exemplar indicators into layer ``l + 1``."""
    _, d, off = column_support(rho)
    return pref + d + off


def downward(alpha, s):
    """Message from layer ``l``'s row constraints into layer ``l - 1``."""
    return (alpha + s).max(axis=1)


def frozen_tau(assignment: np.ndarray, cap: float) -> np.ndarray:
    """Upward message from a layer whose assignments are fixed.

    Exemplars are certain to be clustered above (``cap``); everything else is
    certain not to be (``-inf``).
    """
    is_ex = assignment == np.arange(len(assignment))
    return np.where(is_ex, cap, NEG_INF)


def clamp_rows(assignment: np.ndarray) -> np.ndarray:
    """Responsibility rows pinned to a fixed assignment: 0 for the chosen exemplar, -inf elsewhere."""
    n = len(assignment)
    rho = np.full((n, n), NEG_INF)
    act = np.flatnonzero(assignment >= 0)
    rho[act, assignment[act]] = 0.0
    return rho


def iterate(state: MessageState, problem: LayeredProblem, config: SolverConfig, cap=None) -> MessageState:
    """Run one sweep in place: upward rho/tau pass, then downward alpha/phi pass.

    All four message families are damped; undamped inter-layer messages make
    the layers drive each other into large oscillations.
    """
    state.check_shape(problem)
    L = problem.num_layers
    s, c = problem.similarity, problem.preference
    lam = config.damping
    if cap is None:
        cap = evidence_cap(problem)
    f = state.frozen_below

    for l in range(f, L):
        tau_in = state.tau[l] if l > 0 else None
        new = responsibilities(s[l], state.alpha[l], tau_in, cap)
        state.rho[l] = _damp(state.rho[l], new, lam)
        _check(state.rho[l], l, "rho")
        if l + 1 < L:
            state.tau[l + 1] = _damp(state.tau[l + 1], upward(state.rho[l], c[l]), lam)
            _check(state.tau[l + 1], l + 1, "tau")

    for l in range(L - 1, f - 1, -1):
        pref = c[l] if l == L - 1 else c[l] + state.phi[l]
        new = availabilities(state.rho[l], pref)
        state.alpha[l] = _damp(state.alpha[l], new, lam)
        _check(state.alpha[l], l, "alpha")
        if l > f:
            state.phi[l - 1] = _damp(state.phi[l - 1], downward(state.alpha[l], s[l]), lam)
            _check(state.phi[l - 1], l - 1, "phi")

    state.iteration += 1
    return state

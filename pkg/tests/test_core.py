import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_problem, random_solution
from hap.core import (
    NEG_INF,
    HierarchySolution,
    LayeredProblem,
    MessageState,
    NumericalFailure,
    SolverConfig,
    StructuralError,
    decode,
    evidence_cap,
    iterate,
    objective,
    solve,
    validate_problem,
)
from hap.core.messages import competing_max
from hap.evaluation import brute_force_map
from oracles import FactorGraphMaxSum, flat_ap_reference, naive_objective


# --- validation ------------------------------------------------------------

def test_well_formed_problem_is_valid():
    p = LayeredProblem([[0.0, -1.0], [-1.0, 0.0]], [-1.0, -1.0])
    assert validate_problem(p).valid


def test_nonzero_diagonal_reported():
    p = LayeredProblem([[-0.5, -1.0], [-1.0, 0.0]], [-1.0, -1.0])
    report = validate_problem(p)
    assert "nonzero diagonal at (l=1,j=1)" in report.violations


def test_nan_entry_reported():
    p = LayeredProblem([[0.0, np.nan], [-1.0, 0.0]], [-1.0, -1.0])
    assert any(v.startswith("NaN entry") for v in validate_problem(p).violations)


def test_row_without_finite_entry_reported():
    s = np.full((3, 3), -np.inf)
    p = LayeredProblem(s, [-1.0, -1.0, -1.0])
    assert len(validate_problem(p).violations) >= 3


def test_shape_mismatch_raises():
    with pytest.raises(StructuralError):
        LayeredProblem(np.zeros((2, 3, 3)), np.zeros((2, 2)))


def test_build_broadcasts_preferences():
    s = -np.ones((3, 3))
    p = LayeredProblem.build(s, [-1.0, -2.0], num_layers=2)
    assert p.preference.shape == (2, 3)
    assert np.all(p.preference[1] == -2.0)
    assert np.all(np.diagonal(p.similarity[0]) == 0.0)


# --- objective -------------------------------------------------------------

def test_objective_single_point():
    p = LayeredProblem([[0.0]], [-2.0])
    assert objective(HierarchySolution([[0]]), p) == -2.0


def test_objective_rejects_inconsistent_activity():
    p = LayeredProblem.build(-np.ones((3, 3)), -1.0, num_layers=2)
    # layer 2 clusters point 1, which is not a layer-1 exemplar
    sol = HierarchySolution([[0, 0, 2], [0, 0, 0]])
    assert objective(sol, p) == NEG_INF


def test_objective_dimension_mismatch():
    p = LayeredProblem.build(-np.ones((3, 3)), -1.0)
    with pytest.raises(StructuralError):
        objective(HierarchySolution([[0, 0]]), p)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 3), st.integers(0, 2**32 - 1))
def test_objective_matches_naive_evaluation(n, layers, seed):
    rng = np.random.default_rng(seed)
    p = random_problem(rng, n, layers)
    sol = random_solution(rng, n, layers)
    assert sol.is_valid()
    assert objective(sol, p) == pytest.approx(naive_objective(sol.assignment, p.similarity, p.preference))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 3), st.integers(0, 2**32 - 1), st.floats(0.0, 5.0))
def test_objective_monotone_in_exemplar_preference(n, layers, seed, delta):
    rng = np.random.default_rng(seed)
    p = random_problem(rng, n, layers)
    sol = random_solution(rng, n, layers)
    l = int(rng.integers(layers))
    j = int(rng.choice(sol.exemplars(l)))
    c = p.preference.copy()
    c[l, j] += delta
    raised = LayeredProblem(p.similarity, c)
    assert objective(sol, raised) == pytest.approx(objective(sol, p) + delta)


def test_labels_compose_upward():
    sol = HierarchySolution([[0, 0, 2, 2], [0, -1, 0, -1]])
    assert list(sol.labels(0)) == [0, 0, 2, 2]
    assert list(sol.labels(1)) == [0, 0, 0, 0]
    assert sol.cluster_counts() == [2, 1]


# --- messages --------------------------------------------------------------

def test_competing_max_excludes_own_column():
    x = np.array([[3.0, 1.0, 2.0], [0.0, 0.0, -1.0]])
    np.testing.assert_array_equal(competing_max(x), [[2.0, 3.0, 3.0], [0.0, 0.0, 0.0]])


@pytest.mark.parametrize("damping", [0.0, 0.5, 0.9])
def test_flat_reduction_bitwise(damping):
    rng = np.random.default_rng(7)
    n = 12
    s = rng.uniform(-10, 0, size=(n, n))
    np.fill_diagonal(s, 0.0)
    c = rng.uniform(-8, 0, size=n)
    p = LayeredProblem(s, c)
    state = MessageState.zeros(p)
    cfg = SolverConfig(damping=damping)
    ref = flat_ap_reference(s, c, damping, 100)
    for rho, alpha in ref:
        iterate(state, p, cfg)
        assert np.array_equal(state.rho[0], rho)
        assert np.array_equal(state.alpha[0], alpha)


@pytest.mark.parametrize("n,layers", [(3, 2), (3, 3), (4, 2)])
def test_messages_match_explicit_factor_graph(n, layers):
    rng = np.random.default_rng(n * 10 + layers)
    p = random_problem(rng, n, layers)
    fg = FactorGraphMaxSum(p.similarity, p.preference)
    state = MessageState.zeros(p)
    cfg = SolverConfig(damping=0.0)
    for _ in range(4):
        rho, e_to_h = fg.sweep()
        iterate(state, p, cfg)
        np.testing.assert_allclose(state.rho, rho, rtol=0, atol=1e-9)
        np.testing.assert_allclose(state.alpha, e_to_h, rtol=0, atol=1e-9)


def test_iterate_rejects_wrong_state_shape():
    p = LayeredProblem.build(-np.ones((3, 3)), -1.0, num_layers=2)
    q = LayeredProblem.build(-np.ones((4, 4)), -1.0, num_layers=2)
    with pytest.raises(StructuralError):
        iterate(MessageState.zeros(q), p, SolverConfig())


def test_iterate_flags_nan_with_layer_and_family():
    p = LayeredProblem.build(-np.ones((3, 3)), -1.0, num_layers=2)
    state = MessageState.zeros(p)
    state.alpha[0, 0, 1] = np.nan
    with pytest.raises(NumericalFailure) as err:
        iterate(state, p, SolverConfig())
    assert err.value.layer == 0 and err.value.family == "rho"


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 8), st.integers(1, 3), st.integers(0, 2**32 - 1), st.floats(0.0, 0.6))
def test_no_nan_or_plus_inf_with_forbidden_entries(n, layers, seed, forbid):
    rng = np.random.default_rng(seed)
    p = random_problem(rng, n, layers, forbid=forbid)
    if not validate_problem(p).valid:
        return
    state = MessageState.zeros(p)
    cfg = SolverConfig(damping=0.5)
    for _ in range(15):
        iterate(state, p, cfg)
    for arr in (state.rho, state.alpha, state.tau, state.phi):
        assert not np.isnan(arr).any()
        assert not (arr == np.inf).any()


def test_evidence_cap_exceeds_objective_spread():
    rng = np.random.default_rng(3)
    p = random_problem(rng, 5, 2)
    spread = np.abs(p.similarity).sum() + np.abs(p.preference).sum()
    assert evidence_cap(p) > spread


# --- decode ----------------------------------------------------------------

@pytest.mark.parametrize("layers", [1, 2, 4])
def test_single_point_is_exemplar_everywhere(layers):
    p = LayeredProblem.build(np.zeros((1, 1)), -1.0, num_layers=layers)
    sol = decode(MessageState.zeros(p), p)
    assert all(list(a) == [0] for a in sol.assignment)


def test_strong_self_availability_makes_everyone_exemplar():
    n = 4
    p = LayeredProblem.build(-np.ones((n, n)), [-1.0, -2.0, -3.0, -4.0])
    state = MessageState.zeros(p)
    state.alpha[0] = -10.0
    np.fill_diagonal(state.alpha[0], 5.0)
    sol = decode(state, p)
    assert sol.cluster_counts() == [n]
    assert objective(sol, p) == -10.0


def test_orphans_are_promoted():
    # point 2 cannot reach the only decoded exemplar
    s = np.array([[0.0, -1.0, -np.inf], [-1.0, 0.0, -np.inf], [-np.inf, -1.0, 0.0]])
    p = LayeredProblem(s, [-1.0, -1.0, -1.0])
    state = MessageState.zeros(p)
    state.alpha[0] = np.array([[0.0, 5.0, 0.0], [0.0, 5.0, 0.0], [0.0, 5.0, -9.0]])
    sol = decode(state, p)
    assert sol.is_valid()
    assert objective(sol, p) > NEG_INF


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 8), st.integers(1, 4), st.integers(0, 2**32 - 1), st.floats(0.0, 0.5))
def test_decode_of_random_messages_is_valid(n, layers, seed, forbid):
    rng = np.random.default_rng(seed)
    p = random_problem(rng, n, layers, forbid=forbid)
    if not validate_problem(p).valid:
        return
    state = MessageState.zeros(p)
    state.alpha = rng.normal(scale=10, size=state.alpha.shape)
    state.alpha[rng.random(state.alpha.shape) < 0.1] = NEG_INF
    sol = decode(state, p)
    assert sol.is_valid(), sol.violations()
    assert np.isfinite(objective(sol, p))


# --- solve -----------------------------------------------------------------

def test_single_point_two_layers():
    p = LayeredProblem(np.zeros((2, 1, 1)), [[-1.0], [-2.0]])
    sol, trace = solve(p)
    assert objective(sol, p) == -3.0
    assert trace.converged


def test_four_point_oracle_instance():
    rng = np.random.default_rng(2024)
    s = rng.uniform(-10, 0, size=(2, 4, 4))
    p = LayeredProblem.build(s, -5.0)
    sol, _ = solve(p, SolverConfig(damping=0.5))
    best, value = brute_force_map(p)
    assert objective(sol, p) == pytest.approx(value)
    assert sol == best


def test_resume_with_zero_iterations_is_idempotent():
    rng = np.random.default_rng(5)
    p = random_problem(rng, 10, 2)
    sol, trace = solve(p)
    again, _ = solve(p, SolverConfig(max_iterations=0), state=trace.state)
    assert again == sol


def test_fix_bottom_freezes_every_layer():
    rng = np.random.default_rng(9)
    p = random_problem(rng, 12, 3)
    cfg = SolverConfig(schedule="fix_bottom", fix_period=40, convergence_window=10)
    sol, trace = solve(p, cfg)
    assert trace.converged
    assert trace.state.frozen_below == 3
    assert len(trace.frozen_at) == 3
    assert sol.is_valid()


def test_keep_best_never_worse_than_last_decode():
    rng = np.random.default_rng(11)
    p = random_problem(rng, 15, 3)
    best, trace = solve(p, SolverConfig(max_iterations=200, keep_best=True))
    assert objective(best, p) == pytest.approx(max(trace.objectives + [objective(best, p)]))


def test_solve_rejects_invalid_problem():
    p = LayeredProblem([[-0.5, -1.0], [-1.0, 0.0]], [-1.0, -1.0])
    with pytest.raises(ValueError):
        solve(p)


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(damping=1.0)
    with pytest.raises(ValueError):
        SolverConfig(fix_period=0)


def test_jitter_is_seeded():
    rng = np.random.default_rng(1)
    p = random_problem(rng, 8, 2)
    a, _ = solve(p, SolverConfig(jitter=True, rng_seed=3))
    b, _ = solve(p, SolverConfig(jitter=True, rng_seed=3))
    assert a == b


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 5), st.integers(1, 2), st.integers(0, 2**32 - 1), st.sampled_from([-1.0, 1.0]))
def test_translation_shifts_objective_uniformly(n, layers, seed, delta):
    """Shifting every off-diagonal s and every c by delta shifts each
    configuration by delta times its number of counted terms."""
    rng = np.random.default_rng(seed)
    p = random_problem(rng, n, layers)
    s = p.similarity + delta
    idx = np.arange(n)
    s[:, idx, idx] = 0.0
    q = LayeredProblem(s, p.preference + delta)
    for _ in range(5):
        sol = random_solution(rng, n, layers)
        terms = sum(len(sol.active(l)) for l in range(layers))
        assert objective(sol, q) == pytest.approx(objective(sol, p) + delta * terms)
    # the oracle on the shifted problem is optimal under the same accounting
    best_q, val_q = brute_force_map(q)
    for _ in range(20):
        sol = random_solution(rng, n, layers)
        assert objective(sol, q) <= val_q + 1e-9
    assert objective(best_q, q) == pytest.approx(val_q)

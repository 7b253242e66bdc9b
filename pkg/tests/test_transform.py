"""
Tests for the SMDP kernel and its uniform-step transformation
"""

import numpy as np
import pytest

from aoinf.model import (
    ACTIONS,
    Action,
    DomainError,
    ModelParams,
    StateSpace,
    SystemState,
    ValueFunction,
    feasible_actions,
    transition_dist,
)
from aoinf.transform import (
    TransformConfig,
    TransformedMDP,
    build_smdp_kernel,
    corrupt_kernel,
    ratio_form_residuals,
    transformed_cost,
    transformed_dist,
    verify_ratio_form,
)


def test_theta_range():
    """Test 0 < θ ≤ 1"""
    with pytest.raises(DomainError):
        TransformConfig(0.0)
    with pytest.raises(DomainError):
        TransformConfig(1.5)
    assert TransformConfig(1.0).theta == 1.0


def test_transformed_cost(default_params):
    """Test θ R / L"""
    cfg = TransformConfig(0.5)
    assert transformed_cost(SystemState.of(10, 0), Action.COMPUTE, cfg, default_params) == 5.25
    assert transformed_cost(SystemState.of(1, 0), Action.IDLE, cfg, default_params) == 0.5
    assert transformed_cost(
        SystemState.of(39, 0), Action.OFFLOAD, cfg, default_params
    ) == pytest.approx(239 / 12)


def test_transformed_cost_scales_with_theta(mini_params):
    """Test that the cost ratio equals θ₁/θ₂ everywhere"""
    low, high = TransformConfig(0.25), TransformConfig(0.9)
    for state in StateSpace(mini_params).states:
        for action in feasible_actions(state.mode, mini_params):
            a = transformed_cost(state, action, low, mini_params)
            b = transformed_cost(state, action, high, mini_params)
            assert a / b == pytest.approx(0.25 / 0.9)


def test_transformed_offload_row(default_params):
    """Test the offload row with θ/L = 1/12"""
    space = StateSpace(default_params)
    state = SystemState.of(20, 0)
    row = transformed_dist(state, Action.OFFLOAD, TransformConfig(0.5), default_params)
    row = dict(row.outcomes)
    fail = space.index_of(SystemState.of(26, 6))
    success = space.index_of(SystemState.of(6, 6))
    here = space.index_of(state)
    assert row[fail] == pytest.approx(0.025)
    assert row[success] == pytest.approx(0.7 / 12)
    assert row[here] == pytest.approx(11 / 12)
    assert sum(row.values()) == pytest.approx(1.0, abs=1e-12)


def test_transformed_idle_row(default_params):
    """Test the idle row: half self-loop, half successor"""
    space = StateSpace(default_params)
    state = SystemState.of(5, 25)
    row = transformed_dist(state, Action.IDLE, TransformConfig(0.5), default_params)
    assert dict(row.outcomes) == {
        space.index_of(state): 0.5,
        space.index_of(SystemState.of(6, 26)): 0.5,
    }
    assert row.cost == 2.5


def test_transformed_self_transition_merges():
    """Test that SMDP self-transition mass joins the self-loop"""
    # idle at the cap with an empty cache and P=1 stays put
    params = ModelParams(aoinf_cap=3, period=1, window=0)
    space = StateSpace(params)
    state = SystemState.of(3, 0)
    row = transformed_dist(state, Action.IDLE, TransformConfig(0.5), params, space)
    assert row.outcomes == ((space.index_of(state), 1.0),)


def test_kernel_matches_transition_dist(mini_params):
    """Test the vectorized kernel row by row against transition_dist"""
    space = StateSpace(mini_params)
    kernel = build_smdp_kernel(space)
    for i, state in enumerate(space.states):
        feasible = feasible_actions(state.mode, mini_params)
        for action in ACTIONS:
            assert kernel.feasible[action, i] == (action in feasible)
            if action not in feasible:
                assert kernel.row(i, action) == {}
                continue
            dist = transition_dist(state, action, mini_params)
            expected = {space.index_of(s): p for s, p in dist.outcomes}
            row = kernel.row(i, action)
            assert row.keys() == expected.keys()
            for j, p in expected.items():
                assert row[j] == pytest.approx(p, abs=1e-15)
            assert kernel.cost[action, i] == dist.cost


def test_kernel_matches_transition_dist_sampled(default_params, default_kernel):
    """Test a spread of baseline-instance states against transition_dist"""
    space = default_kernel.space
    for i in np.linspace(0, space.size - 1, 300, dtype=int):
        state = space.state_at(int(i))
        for action in feasible_actions(state.mode, default_params):
            dist = transition_dist(state, action, default_params)
            expected = {space.index_of(s): p for s, p in dist.outcomes}
            assert default_kernel.row(int(i), action) == pytest.approx(expected, abs=1e-15)


def test_kernel_rows_stochastic(mini_params):
    """Test SMDP and transformed rows sum to 1 within 1e-12"""
    kernel = build_smdp_kernel(StateSpace(mini_params))
    for theta in (0.25, 0.5, 1.0):
        mdp = TransformedMDP.from_kernel(kernel, TransformConfig(theta))
        for action in ACTIONS:
            feasible = kernel.feasible[action]
            for matrix in (kernel.matrices[action], mdp.matrices[action]):
                sums = np.asarray(matrix.sum(axis=1)).ravel()
                assert np.all(np.abs(sums[feasible] - 1.0) <= 1e-12)
                assert np.all(sums[~feasible] == 0.0)
                assert matrix.data.min() >= 0.0
            assert np.all(np.isinf(mdp.cost[action, ~feasible]))


def test_transformed_mdp_matches_scalar_rows(mini_params):
    """Test that from_kernel agrees with transformed_dist"""
    space = StateSpace(mini_params)
    cfg = TransformConfig(0.5)
    mdp = TransformedMDP.from_kernel(build_smdp_kernel(space), cfg)
    for i, state in enumerate(space.states):
        for action in feasible_actions(state.mode, mini_params):
            row = transformed_dist(state, action, cfg, mini_params, space)
            assert mdp.row(i, action) == pytest.approx(dict(row.outcomes), abs=1e-15)
            assert mdp.cost[action, i] == pytest.approx(row.cost)


def test_self_loop_mass_under_idle(mini_params):
    """Test that θ < 1 leaves at least 1 − θ on the diagonal of idle rows"""
    kernel = build_smdp_kernel(StateSpace(mini_params))
    mdp = TransformedMDP.from_kernel(kernel, TransformConfig(0.5))
    assert np.all(mdp.matrices[Action.IDLE].diagonal() >= 0.5)


def test_corrupt_kernel_leaves_original(mini_params):
    """Test that fault injection copies the kernel and changes only link actions"""
    kernel = build_smdp_kernel(StateSpace(mini_params))
    before = {a: kernel.matrices[a].copy() for a in ACTIONS}
    wrong = corrupt_kernel(kernel)

    for action in ACTIONS:
        assert (kernel.matrices[action] != before[action]).nnz == 0
    for action in (Action.IDLE, Action.COMPUTE):
        assert (wrong.matrices[action] != kernel.matrices[action]).nnz == 0
    for action in (Action.TX, Action.OFFLOAD):
        assert (wrong.matrices[action] != kernel.matrices[action]).nnz > 0
    assert np.array_equal(wrong.cost, kernel.cost)


def test_ratio_form_constant_cost_model():
    """Test that Δ̂=1 has gain 1 with V ≡ 0"""
    params = ModelParams(aoinf_cap=1, period=1, window=1)
    space = StateSpace(params)
    values = ValueFunction.zeros(space)
    for state in space.states:
        assert verify_ratio_form(state, values, 1.0, params) == 0.0
        assert verify_ratio_form(state, values, 0.0, params) == 1.0


def test_ratio_form_vector_matches_scalar(mini_params):
    """Test ratio_form_residuals against verify_ratio_form"""
    space = StateSpace(mini_params)
    rng = np.random.default_rng(3)
    values = ValueFunction(space, rng.normal(size=space.size))
    residuals = ratio_form_residuals(build_smdp_kernel(space), values.values, 2.0)
    for i, state in enumerate(space.states):
        assert residuals[i] == pytest.approx(verify_ratio_form(state, values, 2.0, mini_params))


def test_ratio_form_detects_perturbation(mini_params, mini_solution):
    """Test that bumping one value changes the residual somewhere"""
    space = StateSpace(mini_params)
    kernel = build_smdp_kernel(space)
    values = mini_solution.values.values
    base = ratio_form_residuals(kernel, values, mini_solution.gain_per_slot)
    bumped = values.copy()
    bumped[17] += 1.0
    after = ratio_form_residuals(kernel, bumped, mini_solution.gain_per_slot)
    assert base.max() <= 1e-6
    assert after.max() > 0.1

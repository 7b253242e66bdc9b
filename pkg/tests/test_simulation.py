"""
Tests for the slot-level simulator
"""

import numpy as np
import pytest

from aoinf.model import (
    Action,
    InfeasibleActionError,
    Policy,
    StateSpace,
    SystemState,
    holding_time,
)
from aoinf.policies import baseline, evaluate_policy_exact, onboard_policy, tabulate
from aoinf.simulation import replay_states, reset_level, simulate, summarize


def test_same_seed_same_trajectory(mini_params, mini_solution):
    """Test that a seed fully determines the run"""
    a = simulate(mini_solution.policy, mini_params, horizon_slots=3000, seed=42)
    b = simulate(mini_solution.policy, mini_params, horizon_slots=3000, seed=42)
    assert np.array_equal(a.per_slot_aoinf, b.per_slot_aoinf)
    assert a.action_segments == b.action_segments
    assert a.update_events == b.update_events


def test_different_seeds_differ(mini_params, mini_solution):
    """Test that different seeds give different outcome draws"""
    a = simulate(mini_solution.policy, mini_params, horizon_slots=3000, seed=1)
    b = simulate(mini_solution.policy, mini_params, horizon_slots=3000, seed=2)
    assert [e.success for e in a.update_events] != [e.success for e in b.update_events]


def test_trace_lengths_and_segments(default_params):
    """Test that segments tile the horizon and traces have one entry per slot"""
    space = StateSpace(default_params)
    log = simulate(baseline("random", space), default_params, horizon_slots=5000, seed=3)
    assert log.horizon == 5000
    for trace in (log.cache_age_per_slot, log.cache_full_per_slot, log.visible_per_slot):
        assert trace.size == 5000
    slots = [slot for slot, _, _ in log.action_segments]
    assert slots[0] == 0
    for (slot, action, duration), nxt in zip(log.action_segments, slots[1:]):
        assert duration == holding_time(action, default_params)
        assert nxt == slot + duration
    last_slot, _, last_duration = log.action_segments[-1]
    assert last_slot < 5000 <= last_slot + last_duration


def test_replay_matches_decisions(default_params):
    """Test that the per-slot traces reconstruct every decision state"""
    space = StateSpace(default_params)
    log = simulate(baseline("random", space), default_params, horizon_slots=4000, seed=9)
    replayed = [space.index_of(state) for _, state in replay_states(log)]
    assert replayed == log.decision_indices.tolist()


def test_aoinf_trace_bounds(default_params):
    """Test 1 ≤ Δ ≤ Δ̂ and unit growth between resets"""
    space = StateSpace(default_params)
    log = simulate(baseline("random", space), default_params, horizon_slots=4000, seed=5)
    trace = log.per_slot_aoinf
    assert trace.min() >= 1 and trace.max() <= default_params.aoinf_cap
    steps = np.diff(trace)
    delivered = {e.delivered_at for e in log.update_events if e.success}
    for t in np.flatnonzero(steps != 1):
        assert t + 1 in delivered or trace[t] == default_params.aoinf_cap


def test_reset_levels_match_model(default_params):
    """Test that each success lands on its reset level in the trace"""
    space = StateSpace(default_params)
    log = simulate(baseline("random", space), default_params, horizon_slots=20_000, seed=11)
    successes = [e for e in log.update_events if e.success]
    assert successes
    for event in successes:
        if event.delivered_at < log.horizon:
            assert log.per_slot_aoinf[event.delivered_at] == reset_level(event, default_params)
        if event.kind == Action.OFFLOAD:
            assert reset_level(event, default_params) == default_params.offload_dur


def test_cache_age_after_compute(default_params):
    """Test that the cache is aged L_C at the slot after a compute completes"""
    space = StateSpace(default_params)
    log = simulate(
        tabulate(space, onboard_policy), default_params, horizon_slots=2000, seed=0
    )
    slot, action, duration = log.action_segments[0]
    assert action == Action.COMPUTE
    assert not log.cache_full_per_slot[0]
    assert log.cache_full_per_slot[duration]
    assert log.cache_age_per_slot[duration] == default_params.compute_dur


def test_tx_generation_time(default_params):
    """Test that tx updates carry the cache generation slot"""
    space = StateSpace(default_params)
    log = simulate(tabulate(space, onboard_policy), default_params, horizon_slots=3000, seed=4)
    tx = [e for e in log.update_events if e.kind == Action.TX]
    assert tx
    for event in tx:
        start = event.delivered_at - default_params.tx_dur
        assert event.generated_at == start - log.cache_age_per_slot[start]


def test_tx_generation_time_past_cache_cap(mini_params):
    """Test that a cache held longer than Δ̂ keeps its true generation slot"""

    def hold_then_tx(state, params):
        mode = state.mode
        if not mode.cache_full:
            return Action.COMPUTE
        if mode.cache_age == params.aoinf_cap and mode.phase == 0:
            return Action.TX
        return Action.IDLE

    policy = tabulate(StateSpace(mini_params), hold_then_tx)
    log = simulate(policy, mini_params, horizon_slots=20, seed=0)
    first = log.update_events[0]
    # compute at slot 0, the cache saturates at slot 5, tx waits for phase 0 at slot 8
    assert first.kind == Action.TX
    assert first.delivered_at == 9
    assert log.cache_age_per_slot[8] == mini_params.aoinf_cap
    assert first.generated_at == 0
    assert reset_level(first, mini_params) == mini_params.aoinf_cap


def test_link_actions_inside_window(default_params):
    """Test that every tx and offload starts with enough residual visibility"""
    space = StateSpace(default_params)
    log = simulate(baseline("random", space), default_params, horizon_slots=10_000, seed=8)
    summary = summarize(log)
    assert summary["link_actions_in_window"] == 1.0
    for slot, action, duration in log.action_segments:
        if action in (Action.TX, Action.OFFLOAD) and slot + duration <= log.horizon:
            assert log.visible_per_slot[slot : slot + duration].all()


def test_summary_fields(default_params):
    """Test the summary statistics of a random run"""
    space = StateSpace(default_params)
    log = simulate(baseline("random", space), default_params, horizon_slots=20_000, seed=2)
    summary = summarize(log, warmup=1000)
    assert summary["warmup"] == 1000
    assert summary["time_average_aoinf"] == pytest.approx(log.per_slot_aoinf[1000:].mean())
    assert sum(summary["action_frequency"].values()) == pytest.approx(1.0)
    assert sum(summary["action_time_share"].values()) == pytest.approx(1.0)
    assert len(summary["reset_levels"]) >= 2
    assert set(summary["updates"]) == {"tx", "offload"}
    successes = sum(kind["success"] for kind in summary["updates"].values())
    assert successes == sum(summary["reset_levels"].values())


def test_no_success_saturates(default_params):
    """Test that p_T = p_O = 0 drives the trace to Δ̂ and keeps it there"""
    params = default_params.replace(p_tx=0.0, p_offload=0.0)
    space = StateSpace(params)
    log = simulate(baseline("random", space), params, horizon_slots=5000, seed=1)
    assert np.all(log.per_slot_aoinf == 40)
    assert not any(e.success for e in log.update_events)


def test_deterministic_cycle_time_average(mini_params):
    """Test that certain-success offloading settles on its exact average"""
    params = mini_params.replace(p_offload=1.0)
    rule = baseline("offload", StateSpace(params))
    log = simulate(rule, params, horizon_slots=4002, seed=0)
    summary = summarize(log, warmup=2)
    assert summary["time_average_aoinf"] == pytest.approx(3.5)
    assert summary["reset_levels"] == {params.offload_dur: summary["updates"]["offload"]["success"]}


def test_simulation_errors(mini_params, mini_solution):
    """Test horizon, parameter and warm-up validation"""
    with pytest.raises(ValueError, match="horizon"):
        simulate(mini_solution.policy, mini_params, horizon_slots=0)
    with pytest.raises(ValueError, match="different model parameters"):
        simulate(mini_solution.policy, mini_params.replace(p_tx=0.1), horizon_slots=10)
    log = simulate(mini_solution.policy, mini_params, horizon_slots=10)
    with pytest.raises(ValueError, match="warmup"):
        summarize(log, warmup=10)


def test_infeasible_choice_names_slot(mini_params):
    """Test that an infeasible action reports state and slot"""
    space = StateSpace(mini_params)
    always_tx = Policy(space, np.full(space.size, Action.TX, dtype=np.int8))
    with pytest.raises(InfeasibleActionError, match="at slot 0"):
        simulate(always_tx, mini_params, horizon_slots=10)


def test_custom_start_state(mini_params, mini_solution):
    """Test that the first decision is taken in the given start state"""
    start = SystemState.of(2, 1, True, 1)
    log = simulate(mini_solution.policy, mini_params, start=start, horizon_slots=50)
    assert log.per_slot_aoinf[0] == 2
    assert log.phase_at(0) == 1
    assert log.decision_indices[0] == StateSpace(mini_params).index_of(start)


@pytest.mark.slow
def test_long_run_matches_exact_gain(default_params, default_kernel, default_solution):
    """Test that 10⁶ slots of the optimal policy land within 2% of its exact gain"""
    exact = evaluate_policy_exact(default_solution.policy, default_params, kernel=default_kernel)
    log = simulate(default_solution.policy, default_params, horizon_slots=1_000_000, seed=7)
    average = summarize(log)["time_average_aoinf"]
    assert average == pytest.approx(exact.average_aoinf_per_slot, rel=0.02)


@pytest.mark.slow
def test_seed_averaged_optimal_policy(default_params, default_kernel, default_solution):
    """Test that ten seeds of the optimal policy average within 1% of its exact gain"""
    policy = default_solution.policy
    exact = evaluate_policy_exact(policy, default_params, kernel=default_kernel)
    averages = [
        summarize(simulate(policy, default_params, horizon_slots=1_000_000, seed=s))[
            "time_average_aoinf"
        ]
        for s in range(10)
    ]
    assert np.mean(averages) == pytest.approx(exact.average_aoinf_per_slot, rel=0.01)


@pytest.mark.slow
def test_optimal_trajectory_update_semantics(default_params, default_solution):
    """Test reset levels, link timing and AoInf bounds on an optimal full-size run"""
    log = simulate(default_solution.policy, default_params, horizon_slots=200_000, seed=7)
    summary = summarize(log)

    trace = log.per_slot_aoinf
    assert trace.min() >= 1 and trace.max() <= default_params.aoinf_cap
    assert summary["link_actions_in_window"] == 1.0
    assert len(summary["reset_levels"]) >= 2

    for event in (e for e in log.update_events if e.success):
        level = reset_level(event, default_params)
        if event.delivered_at < log.horizon:
            assert trace[event.delivered_at] == level
        if event.kind == Action.OFFLOAD:
            assert level == default_params.offload_dur
        else:
            assert level >= default_params.tx_dur

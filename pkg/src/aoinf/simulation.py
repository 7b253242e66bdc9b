"""
Slot-level Monte Carlo simulation of a stationary policy
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from numpy.random import SeedSequence, default_rng

from .model import (
    ACTIONS,
    LINK_ACTIONS,
    Action,
    InfeasibleActionError,
    ModelParams,
    Policy,
    SystemState,
    aged_aoinf,
    holding_time,
    initial_state,
    mode_after,
    remaining_visibility,
    success_prob,
    success_reset,
)
from .policies import DecisionRule, as_decision_rule

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class UpdateEvent:
    """
    One tx or offload attempt

    generated_at is the slot the delivered observation was sensed (start of the compute
    that filled the cache for tx, action start for offload); delivered_at is the first
    slot after completion. generated_at is exact even when the cache age in the state has
    saturated at Δ̂; for a cache already present in the start state it is −τ.
    """

    generated_at: int
    delivered_at: int
    success: bool
    kind: Action


@dataclass
class TrajectoryLog:
    """Per-slot traces, action segments and update events of one run"""

    per_slot_aoinf: np.ndarray
    action_segments: List[Tuple[int, Action, int]]
    cache_age_per_slot: np.ndarray
    cache_full_per_slot: np.ndarray
    visible_per_slot: np.ndarray
    action_per_slot: np.ndarray
    update_events: List[UpdateEvent]
    decision_indices: np.ndarray
    seed: int
    params: ModelParams
    start: SystemState

    @property
    def horizon(self) -> int:
        return int(self.per_slot_aoinf.size)

    def phase_at(self, slot: int) -> int:
        return (self.start.mode.phase + slot) % self.params.period


def _streams(seed: int) -> Tuple[np.random.Generator, np.random.Generator]:
    """One SeedSequence per run, split into an outcome stream and an action stream"""
    outcomes, actions = SeedSequence(seed).spawn(2)
    return default_rng(outcomes), default_rng(actions)


def simulate(
    policy: Union[Policy, DecisionRule],
    params: ModelParams,
    start: Optional[SystemState] = None,
    horizon_slots: int = 100_000,
    seed: int = 0,
) -> TrajectoryLog:
    """
    Simulate a policy slot by slot

    Decisions happen only when the running action completes. The L_a slots of an action
    are charged ages Δ, Δ+1, ..., Δ+L_a−1 (capped); a success draw, if any, takes effect at
    the first slot after completion. A run whose last action extends past the horizon
    is truncated.

    Args:
        policy: Deterministic Policy or randomized DecisionRule
        params: Model parameters
        start: Initial state (default (Δ̂, 0, 0, 0))
        horizon_slots: Number of slots to record
        seed: Seed of the run's SeedSequence

    Returns:
        TrajectoryLog
    """
    if horizon_slots < 1:
        raise ValueError(f"horizon must be >= 1 slot, got {horizon_slots}")

    rule = as_decision_rule(policy)
    space = rule.space
    if space.params != params:
        raise ValueError("policy was built for different model parameters")

    start = start or initial_state(params)
    outcome_rng, action_rng = _streams(seed)
    cap = params.aoinf_cap

    aoinf_trace = np.empty(horizon_slots, dtype=np.int64)
    cache_age = np.empty(horizon_slots, dtype=np.int64)
    cache_full = np.empty(horizon_slots, dtype=bool)
    action_trace = np.empty(horizon_slots, dtype=np.int8)
    segments: List[Tuple[int, Action, int]] = []
    events: List[UpdateEvent] = []
    decisions: List[int] = []

    state = start
    slot = 0
    # slot the cached observation was sensed; cache_age saturates at the cap, this does not
    cache_born: Optional[int] = -start.mode.cache_age if start.mode.cache_full else None
    while slot < horizon_slots:
        index = space.index_of(state)
        action = rule.choose(index, action_rng)
        mode = state.mode
        try:
            next_mode = mode_after(mode, action, params)
        except InfeasibleActionError:
            raise InfeasibleActionError(
                f"policy chose {action.label} in state {state} at slot {slot}, "
                "where it is infeasible"
            )

        duration = holding_time(action, params)
        end = min(slot + duration, horizon_slots)
        offsets = np.arange(end - slot)
        aoinf_trace[slot:end] = np.minimum(state.aoinf + offsets, cap)
        cache_full[slot:end] = mode.cache_full
        cache_age[slot:end] = np.minimum(mode.cache_age + offsets, cap) if mode.cache_full else 0
        action_trace[slot:end] = action
        segments.append((slot, action, duration))
        decisions.append(index)

        aoinf = aged_aoinf(state.aoinf, action, params)
        if action in LINK_ACTIONS:
            success = bool(outcome_rng.random() < success_prob(action, params))
            generated = cache_born if action == Action.TX and cache_born is not None else slot
            events.append(UpdateEvent(generated, slot + duration, success, action))
            if success:
                aoinf = success_reset(action, mode, params)
        if action == Action.COMPUTE:
            cache_born = slot
        elif not next_mode.cache_full:
            cache_born = None

        state = SystemState(aoinf, next_mode)
        slot += duration

    phases = (start.mode.phase + np.arange(horizon_slots)) % params.period
    logger.debug(
        "Simulated %d slots (%d decisions, %d updates) with seed %d",
        horizon_slots,
        len(segments),
        len(events),
        seed,
    )
    return TrajectoryLog(
        per_slot_aoinf=aoinf_trace,
        action_segments=segments,
        cache_age_per_slot=cache_age,
        cache_full_per_slot=cache_full,
        visible_per_slot=phases < params.window,
        action_per_slot=action_trace,
        update_events=events,
        decision_indices=np.asarray(decisions, dtype=np.int64),
        seed=seed,
        params=params,
        start=start,
    )


def replay_states(log: TrajectoryLog) -> List[Tuple[int, SystemState]]:
    """Reconstruct the SMDP state at every decision epoch from the per-slot traces"""
    result = []
    for slot, _, _ in log.action_segments:
        result.append(
            (
                slot,
                SystemState.of(
                    int(log.per_slot_aoinf[slot]),
                    log.phase_at(slot),
                    bool(log.cache_full_per_slot[slot]),
                    int(log.cache_age_per_slot[slot]),
                ),
            )
        )
    return result


def reset_level(event: UpdateEvent, params: ModelParams) -> int:
    return min(event.delivered_at - event.generated_at, params.aoinf_cap)


def summarize(log: TrajectoryLog, warmup: int = 0) -> Dict[str, object]:
    """
    Statistics of a trajectory

    Returns:
        Dict with the time-average AoInf after warm-up, per-action segment frequency and
        time share, the reset-level histogram of successful updates, update counts per
        kind and the fraction of link actions started with enough residual visibility
    """
    if not log.action_segments:
        raise ValueError("cannot summarize an empty trajectory log")
    if not 0 <= warmup < log.horizon:
        raise ValueError(f"warmup must lie in [0, {log.horizon}), got {warmup}")

    params = log.params
    counts = Counter(action for _, action, _ in log.action_segments)
    slots = np.bincount(log.action_per_slot, minlength=len(ACTIONS))

    link, in_window = 0, 0
    for slot, action, _ in log.action_segments:
        if action not in LINK_ACTIONS:
            continue
        link += 1
        need = params.tx_dur if action == Action.TX else params.upload_dur
        if remaining_visibility(log.phase_at(slot), params) >= need:
            in_window += 1

    levels = Counter(reset_level(e, params) for e in log.update_events if e.success)
    updates = {
        kind.label: {
            "success": sum(1 for e in log.update_events if e.kind == kind and e.success),
            "failure": sum(1 for e in log.update_events if e.kind == kind and not e.success),
        }
        for kind in (Action.TX, Action.OFFLOAD)
    }

    total = len(log.action_segments)
    return {
        "seed": log.seed,
        "horizon": log.horizon,
        "warmup": warmup,
        "time_average_aoinf": float(log.per_slot_aoinf[warmup:].mean()),
        "action_frequency": {a.label: counts.get(a, 0) / total for a in ACTIONS},
        "action_time_share": {a.label: float(slots[a]) / log.horizon for a in ACTIONS},
        "reset_levels": {int(k): v for k, v in sorted(levels.items())},
        "updates": updates,
        "link_actions_in_window": in_window / link if link else 1.0,
    }

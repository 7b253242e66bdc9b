"""
SMDP domain model: parameters, modes, states, actions, transitions and costs
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property
from typing import FrozenSet, List, Tuple

import numpy as np


class DomainError(ValueError):
    """Argument outside the domain of a model operation"""


class InfeasibleActionError(DomainError):
    """Action not admissible in the current mode"""


class Action(IntEnum):
    """Controller actions, in canonical tie-breaking order"""

    IDLE = 0
    COMPUTE = 1
    TX = 2
    OFFLOAD = 3

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "Action":
        try:
            return cls[str(label).strip().upper()]
        except KeyError:
            raise DomainError(f"Unknown action: {label!r}")


ACTIONS: Tuple[Action, ...] = tuple(Action)
LINK_ACTIONS = frozenset({Action.TX, Action.OFFLOAD})


@dataclass(frozen=True)
class ModelParams:
    """
    Scalar parameters of the SMDP

    Defaults are the baseline numerical setting (cap 40, period 30, window 20,
    C_S=2, U_tx=3, U_img=5, C_L=1) with p_T=0.6 and p_O=0.7.
    """

    aoinf_cap: int = 40
    period: int = 30
    window: int = 20
    compute_dur: int = 2
    tx_dur: int = 3
    upload_dur: int = 5
    ground_infer_dur: int = 1
    p_tx: float = 0.6
    p_offload: float = 0.7

    _MINIMA = (
        ("aoinf_cap", 1),
        ("period", 1),
        ("window", 0),
        ("compute_dur", 1),
        ("tx_dur", 1),
        ("upload_dur", 1),
        ("ground_infer_dur", 0),
    )

    def __post_init__(self):
        for name, minimum in self._MINIMA:
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise DomainError(f"{name} must be an integer, got {value!r}")
            if value < minimum:
                raise DomainError(f"{name} must be >= {minimum}, got {value}")

        if self.window > self.period:
            raise DomainError(
                f"window ({self.window}) must not exceed period ({self.period})"
            )

        for name in ("p_tx", "p_offload"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float, np.floating)):
                raise DomainError(f"{name} must be a probability, got {value!r}")
            if not 0.0 <= float(value) <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {value}")

    @property
    def offload_dur(self) -> int:
        """L_O = U_img + C_L"""
        return self.upload_dur + self.ground_infer_dur

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class Mode:
    """Contact phase, cache occupancy and cache age"""

    phase: int
    cache_full: bool
    cache_age: int

    def __post_init__(self):
        if self.cache_age < 0:
            raise DomainError(f"cache_age must be >= 0, got {self.cache_age}")
        if not self.cache_full and self.cache_age != 0:
            raise DomainError(f"empty cache must have cache_age 0, got {self.cache_age}")


@dataclass(frozen=True)
class SystemState:
    """Ground AoInf together with the mode"""

    aoinf: int
    mode: Mode

    @classmethod
    def of(
        cls, aoinf: int, phase: int, cache_full: bool = False, cache_age: int = 0
    ) -> "SystemState":
        return cls(int(aoinf), Mode(int(phase), bool(cache_full), int(cache_age)))

    def as_tuple(self) -> Tuple[int, int, int, int]:
        return (self.aoinf, self.mode.phase, int(self.mode.cache_full), self.mode.cache_age)

    def __str__(self):
        return "(Δ={}, φ={}, q={}, τ={})".format(*self.as_tuple())


@dataclass(frozen=True)
class TransitionDist:
    """Holding time, one-step cost and successor distribution of one action"""

    holding: int
    cost: int
    outcomes: Tuple[Tuple[SystemState, float], ...]


def _check_phase(phase: int, params: ModelParams):
    if not 0 <= phase < params.period:
        raise DomainError(f"phase must lie in [0, {params.period}), got {phase}")


def _check_aoinf(aoinf: int, params: ModelParams):
    if not 1 <= aoinf <= params.aoinf_cap:
        raise DomainError(f"aoinf must lie in [1, {params.aoinf_cap}], got {aoinf}")


def remaining_visibility(phase: int, params: ModelParams) -> int:
    """Slots of link availability left in the current contact cycle"""
    _check_phase(phase, params)
    return params.window - phase if phase < params.window else 0


def holding_time(action: Action, params: ModelParams) -> int:
    if action == Action.IDLE:
        return 1
    if action == Action.COMPUTE:
        return params.compute_dur
    if action == Action.TX:
        return params.tx_dur
    return params.offload_dur


def success_prob(action: Action, params: ModelParams) -> float:
    if action == Action.TX:
        return float(params.p_tx)
    if action == Action.OFFLOAD:
        return float(params.p_offload)
    return 0.0


def feasible_actions(mode: Mode, params: ModelParams) -> FrozenSet[Action]:
    """
    Admissible action set for a mode

    Idle and compute are always available; tx needs a full cache and enough residual
    visibility for U_tx slots, offload needs enough residual visibility for U_img slots.
    """
    residual = remaining_visibility(mode.phase, params)
    actions = {Action.IDLE, Action.COMPUTE}
    if mode.cache_full and residual >= params.tx_dur:
        actions.add(Action.TX)
    if residual >= params.upload_dur:
        actions.add(Action.OFFLOAD)
    return frozenset(actions)


def phase_after(phase: int, action: Action, params: ModelParams) -> int:
    _check_phase(phase, params)
    return (phase + holding_time(action, params)) % params.period


def mode_after(mode: Mode, action: Action, params: ModelParams) -> Mode:
    """Deterministic post-action mode"""
    if action not in feasible_actions(mode, params):
        raise InfeasibleActionError(f"{action.label} is not feasible in mode {mode}")

    phase = phase_after(mode.phase, action, params)
    cap = params.aoinf_cap

    if action == Action.IDLE:
        if mode.cache_full:
            return Mode(phase, True, min(mode.cache_age + 1, cap))
        return Mode(phase, False, 0)
    if action == Action.COMPUTE:
        return Mode(phase, True, min(params.compute_dur, cap))
    if action == Action.TX:
        # single-use cache: consumed whether or not the update succeeds
        return Mode(phase, False, 0)
    if mode.cache_full:
        return Mode(phase, True, min(mode.cache_age + params.offload_dur, cap))
    return Mode(phase, False, 0)


def success_reset(action: Action, mode: Mode, params: ModelParams) -> int:
    """AoInf right after a successful tx or offload"""
    if action == Action.TX:
        return min(mode.cache_age + params.tx_dur, params.aoinf_cap)
    if action == Action.OFFLOAD:
        return min(params.offload_dur, params.aoinf_cap)
    raise DomainError(f"{action.label} never delivers an update")


def aged_aoinf(aoinf: int, action: Action, params: ModelParams) -> int:
    _check_aoinf(aoinf, params)
    return min(aoinf + holding_time(action, params), params.aoinf_cap)


def capped_age_sum(aoinf: int, duration: int, cap: int) -> int:
    """sum_{i<duration} min(aoinf + i, cap), in closed form"""
    uncapped = max(0, min(duration, cap - aoinf))
    return uncapped * aoinf + uncapped * (uncapped - 1) // 2 + (duration - uncapped) * cap


def slot_cost(aoinf: int, action: Action, params: ModelParams) -> int:
    """Accumulated capped AoInf over the holding interval of an action"""
    _check_aoinf(aoinf, params)
    return capped_age_sum(aoinf, holding_time(action, params), params.aoinf_cap)


def transition_dist(state: SystemState, action: Action, params: ModelParams) -> TransitionDist:
    """
    One SMDP step from a state under an action

    Args:
        state: Current state
        action: Action, must be feasible in state.mode
        params: Model parameters

    Returns:
        TransitionDist with one outcome when the success probability is 0 or 1 or when
        the failure and success successors coincide, two outcomes otherwise
    """
    if action not in feasible_actions(state.mode, params):
        raise InfeasibleActionError(f"{action.label} is not feasible in state {state}")

    mode_next = mode_after(state.mode, action, params)
    p = success_prob(action, params)
    failure = SystemState(aged_aoinf(state.aoinf, action, params), mode_next)

    if p == 0.0:
        outcomes: Tuple[Tuple[SystemState, float], ...] = ((failure, 1.0),)
    else:
        success = SystemState(success_reset(action, state.mode, params), mode_next)
        if p == 1.0:
            outcomes = ((success, 1.0),)
        elif success == failure:
            outcomes = ((failure, 1.0),)
        else:
            outcomes = ((failure, 1.0 - p), (success, p))

    return TransitionDist(
        holding=holding_time(action, params),
        cost=slot_cost(state.aoinf, action, params),
        outcomes=outcomes,
    )


def is_admissible(state: SystemState, params: ModelParams) -> bool:
    mode = state.mode
    return (
        1 <= state.aoinf <= params.aoinf_cap
        and 0 <= mode.phase < params.period
        and 0 <= mode.cache_age <= params.aoinf_cap
        and (mode.cache_full or mode.cache_age == 0)
    )


def initial_state(params: ModelParams) -> SystemState:
    """(Δ̂, 0, 0, 0): nothing delivered yet, empty cache, start of a contact cycle"""
    return SystemState.of(params.aoinf_cap, 0, False, 0)


class StateSpace:
    """
    Dense lexicographic indexing of all admissible states

    States are ordered by (Δ, φ, q, τ); within one (Δ, φ) block the empty-cache state
    comes first, followed by the full-cache states for τ = 0..Δ̂.
    """

    def __init__(self, params: ModelParams):
        self.params = params
        self.block = params.aoinf_cap + 2
        self.size = params.aoinf_cap * params.period * self.block

        i = np.arange(self.size, dtype=np.int64)
        slot = i % self.block
        base = i // self.block
        self.phase = base % params.period
        self.aoinf = base // params.period + 1
        self.cache_full = slot > 0
        self.cache_age = np.maximum(slot - 1, 0)

    def __len__(self):
        return self.size

    def indices(self, aoinf, phase, cache_full, cache_age) -> np.ndarray:
        """Vectorized index of component arrays (no admissibility check)"""
        slot = np.where(cache_full, np.asarray(cache_age) + 1, 0)
        base = (np.asarray(aoinf) - 1) * self.params.period + np.asarray(phase)
        return base * self.block + slot

    def index_of(self, state: SystemState) -> int:
        if not is_admissible(state, self.params):
            raise DomainError(f"State {state} is not admissible")
        m = state.mode
        return int(self.indices(state.aoinf, m.phase, m.cache_full, m.cache_age))

    def state_at(self, index: int) -> SystemState:
        if not 0 <= index < self.size:
            raise DomainError(f"State index {index} out of range [0, {self.size})")
        return SystemState.of(
            int(self.aoinf[index]),
            int(self.phase[index]),
            bool(self.cache_full[index]),
            int(self.cache_age[index]),
        )

    @cached_property
    def states(self) -> List[SystemState]:
        return [self.state_at(i) for i in range(self.size)]

    def aoinf_axis(self, mode: Mode) -> np.ndarray:
        """Indices of the states (1, m), (2, m), ..., (Δ̂, m)"""
        aoinf = np.arange(1, self.params.aoinf_cap + 1)
        return self.indices(aoinf, mode.phase, mode.cache_full, mode.cache_age)

    def __str__(self):
        return f"StateSpace(size={self.size}, cap={self.params.aoinf_cap})"


def enumerate_states(params: ModelParams) -> StateSpace:
    return StateSpace(params)


class ValueFunction:
    """Dense differential values over a StateSpace"""

    def __init__(self, space: StateSpace, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.shape != (space.size,):
            raise DomainError(f"expected {space.size} values, got shape {values.shape}")
        self.space = space
        self.values = values

    @classmethod
    def zeros(cls, space: StateSpace) -> "ValueFunction":
        return cls(space, np.zeros(space.size))

    def __getitem__(self, state: SystemState) -> float:
        return float(self.values[self.space.index_of(state)])

    def __len__(self):
        return self.space.size


class Policy:
    """Dense deterministic policy: one action code per state index"""

    def __init__(self, space: StateSpace, actions: np.ndarray):
        actions = np.asarray(actions, dtype=np.int8)
        if actions.shape != (space.size,):
            raise DomainError(f"expected {space.size} actions, got shape {actions.shape}")
        self.space = space
        self.actions = actions

    def __getitem__(self, state: SystemState) -> Action:
        return Action(int(self.actions[self.space.index_of(state)]))

    def __len__(self):
        return self.space.size

    def __eq__(self, other):
        if not isinstance(other, Policy):
            return NotImplemented
        return self.space.params == other.space.params and np.array_equal(
            self.actions, other.actions
        )

    def mismatches(self, other: "Policy") -> np.ndarray:
        """Indices where two policies disagree"""
        return np.flatnonzero(self.actions != other.actions)

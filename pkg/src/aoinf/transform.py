"""
Uniform-step equivalent MDP of the SMDP

The SMDP kernel is materialized once as sparse matrices (one per action); the transformed
kernel rescales every row by θ/L_a and puts the remaining mass on a self-loop.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .model import (
    ACTIONS,
    Action,
    DomainError,
    ModelParams,
    StateSpace,
    SystemState,
    ValueFunction,
    feasible_actions,
    holding_time,
    success_prob,
    transition_dist,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TransformConfig:
    """Uniformization constant θ, 0 < θ ≤ min_a L_a = 1"""

    theta: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.theta <= 1.0:
            raise DomainError(f"theta must lie in (0, 1], got {self.theta}")
        if self.theta == 1.0:
            logger.warning(
                "theta=1 puts no self-loop mass on idle rows; "
                "idle-heavy policies may induce a periodic chain"
            )


@dataclass(frozen=True)
class TransformedKernelRow:
    cost: float
    outcomes: Tuple[Tuple[int, float], ...]


def transformed_cost(
    state: SystemState, action: Action, cfg: TransformConfig, params: ModelParams
) -> float:
    dist = transition_dist(state, action, params)
    return cfg.theta * dist.cost / dist.holding


def transformed_dist(
    state: SystemState,
    action: Action,
    cfg: TransformConfig,
    params: ModelParams,
    space: Optional[StateSpace] = None,
) -> TransformedKernelRow:
    """
    One row of the transformed kernel, keyed by state index

    Off-diagonal SMDP mass is scaled by θ/L_a; the self-loop gets 1 − θ/L_a plus the
    scaled SMDP self-transition mass. Outcomes are sorted by index.
    """
    space = space or StateSpace(params)
    dist = transition_dist(state, action, params)
    scale = cfg.theta / dist.holding
    here = space.index_of(state)

    masses: Dict[int, float] = {here: 1.0 - scale}
    for successor, prob in dist.outcomes:
        j = space.index_of(successor)
        masses[j] = masses.get(j, 0.0) + scale * prob

    return TransformedKernelRow(
        cost=cfg.theta * dist.cost / dist.holding,
        outcomes=tuple(sorted((j, p) for j, p in masses.items() if p > 0.0)),
    )


def _capped_age_sums(aoinf: np.ndarray, duration: int, cap: int) -> np.ndarray:
    uncapped = np.clip(cap - aoinf, 0, duration)
    return uncapped * aoinf + uncapped * (uncapped - 1) // 2 + (duration - uncapped) * cap


@dataclass
class SMDPKernel:
    """
    Sparse SMDP kernel over a StateSpace

    Attributes:
        space: State space the rows and columns are indexed by
        matrices: Per-action |S|×|S| CSR transition matrices (empty rows where infeasible)
        cost: |A|×|S| integer one-step costs R(Δ, a)
        holding: |A| holding times L_a
        feasible: |A|×|S| feasibility mask
    """

    space: StateSpace
    matrices: Dict[Action, sp.csr_matrix]
    cost: np.ndarray
    holding: np.ndarray
    feasible: np.ndarray

    @property
    def params(self) -> ModelParams:
        return self.space.params

    @cached_property
    def stacked(self) -> sp.csr_matrix:
        """(|A|·|S|)×|S| matrix; row a·|S|+s is P(·|s, a)"""
        return sp.vstack([self.matrices[a] for a in ACTIONS], format="csr")

    def row(self, index: int, action: Action) -> Dict[int, float]:
        matrix = self.matrices[action]
        start, end = matrix.indptr[index], matrix.indptr[index + 1]
        return dict(zip(matrix.indices[start:end].tolist(), matrix.data[start:end].tolist()))

    def ratio_q(self, values: np.ndarray) -> np.ndarray:
        """|A|×|S| ratio-form action values (R + PV − V)/L_a, +inf where infeasible"""
        n = self.space.size
        cont = (self.stacked @ values).reshape(len(ACTIONS), n)
        q = (self.cost + cont - values[None, :]) / self.holding[:, None]
        return np.where(self.feasible, q, np.inf)


def build_smdp_kernel(space: StateSpace) -> SMDPKernel:
    """
    Materialize the SMDP kernel for every (state, action) pair

    Vectorized over the state space; agrees row by row with transition_dist.
    """
    params = space.params
    n, cap = space.size, params.aoinf_cap
    residual = np.where(space.phase < params.window, params.window - space.phase, 0)

    matrices: Dict[Action, sp.csr_matrix] = {}
    cost = np.zeros((len(ACTIONS), n), dtype=np.int64)
    holding = np.array([holding_time(a, params) for a in ACTIONS], dtype=np.int64)
    feasible = np.zeros((len(ACTIONS), n), dtype=bool)

    for action in ACTIONS:
        duration = holding_time(action, params)
        p = success_prob(action, params)

        if action == Action.TX:
            mask = space.cache_full & (residual >= params.tx_dur)
        elif action == Action.OFFLOAD:
            mask = residual >= params.upload_dur
        else:
            mask = np.ones(n, dtype=bool)
        feasible[action] = mask

        next_phase = (space.phase + duration) % params.period
        if action == Action.IDLE:
            next_full = space.cache_full
            next_age = np.where(space.cache_full, np.minimum(space.cache_age + 1, cap), 0)
        elif action == Action.COMPUTE:
            next_full = np.ones(n, dtype=bool)
            next_age = np.full(n, min(params.compute_dur, cap))
        elif action == Action.TX:
            next_full = np.zeros(n, dtype=bool)
            next_age = np.zeros(n, dtype=np.int64)
        else:
            next_full = space.cache_full
            next_age = np.where(
                space.cache_full, np.minimum(space.cache_age + duration, cap), 0
            )

        rows = np.flatnonzero(mask)
        failure = space.indices(
            np.minimum(space.aoinf + duration, cap), next_phase, next_full, next_age
        )[rows]

        if action == Action.TX:
            reset = np.minimum(space.cache_age + params.tx_dur, cap)
        else:
            reset = np.full(n, min(params.offload_dur, cap))
        success = space.indices(reset, next_phase, next_full, next_age)[rows]

        if p == 0.0:
            r, c, d = rows, failure, np.ones(rows.size)
        elif p == 1.0:
            r, c, d = rows, success, np.ones(rows.size)
        else:
            # coinciding successors collapse into one outcome of mass 1
            split = success != failure
            r = np.concatenate([rows, rows[split]])
            c = np.concatenate([failure, success[split]])
            d = np.concatenate([np.where(split, 1.0 - p, 1.0), np.full(split.sum(), p)])

        matrices[action] = sp.csr_matrix((d, (r, c)), shape=(n, n))
        cost[action] = np.where(mask, _capped_age_sums(space.aoinf, duration, cap), 0)

    logger.debug("Built SMDP kernel over %d states", n)
    return SMDPKernel(
        space=space, matrices=matrices, cost=cost, holding=holding, feasible=feasible
    )


@dataclass
class TransformedMDP:
    """Transformed kernel and costs stacked for vectorized backups"""

    kernel: SMDPKernel
    cfg: TransformConfig
    matrices: Dict[Action, sp.csr_matrix]
    cost: np.ndarray

    @property
    def theta(self) -> float:
        return self.cfg.theta

    @property
    def space(self) -> StateSpace:
        return self.kernel.space

    @classmethod
    def from_kernel(cls, kernel: SMDPKernel, cfg: TransformConfig) -> "TransformedMDP":
        n = kernel.space.size
        matrices = {}
        cost = np.full((len(ACTIONS), n), np.inf)
        for action in ACTIONS:
            scale = cfg.theta / kernel.holding[action]
            mask = kernel.feasible[action]
            loop = sp.diags(np.where(mask, 1.0 - scale, 0.0), format="csr")
            matrix = (scale * kernel.matrices[action] + loop).tocsr()
            matrix.sum_duplicates()
            matrix.eliminate_zeros()
            matrices[action] = matrix
            cost[action, mask] = scale * kernel.cost[action, mask]
        return cls(kernel=kernel, cfg=cfg, matrices=matrices, cost=cost)

    @cached_property
    def stacked(self) -> sp.csr_matrix:
        return sp.vstack([self.matrices[a] for a in ACTIONS], format="csr")

    def q_values(self, values: np.ndarray) -> np.ndarray:
        """|A|×|S| backup terms R̄ + P̄V, +inf where infeasible"""
        cont = (self.stacked @ values).reshape(len(ACTIONS), self.space.size)
        return self.cost + cont

    def row(self, index: int, action: Action) -> Dict[int, float]:
        matrix = self.matrices[action]
        start, end = matrix.indptr[index], matrix.indptr[index + 1]
        return dict(zip(matrix.indices[start:end].tolist(), matrix.data[start:end].tolist()))


def corrupt_kernel(kernel: SMDPKernel) -> SMDPKernel:
    """
    Fault injection: a kernel with wrong link-action success probabilities

    Each nonzero success probability is replaced by 0 and each zero one by 1; costs and
    feasibility are untouched, so only solutions built on this kernel go wrong.
    """
    params = kernel.params
    shadow = params.replace(
        p_tx=0.0 if params.p_tx > 0 else 1.0,
        p_offload=0.0 if params.p_offload > 0 else 1.0,
    )
    wrong = build_smdp_kernel(StateSpace(shadow))
    matrices = dict(kernel.matrices)
    for action in (Action.TX, Action.OFFLOAD):
        matrices[action] = wrong.matrices[action]
    logger.warning("Using a corrupted SMDP kernel (fault injection)")
    return dataclasses.replace(kernel, matrices=matrices)


def ratio_form_residuals(kernel: SMDPKernel, values: np.ndarray, rho: float) -> np.ndarray:
    """|ρ − min_a (R + PV − V)/L_a| at every state"""
    return np.abs(rho - kernel.ratio_q(values).min(axis=0))


def verify_ratio_form(
    state: SystemState, V: ValueFunction, rho: float, params: ModelParams
) -> float:
    """Ratio-form ACOE residual at one state, computed from transition_dist"""
    best = np.inf
    for action in feasible_actions(state.mode, params):
        dist = transition_dist(state, action, params)
        expected = sum(prob * V[succ] for succ, prob in dist.outcomes)
        best = min(best, (dist.cost + expected - V[state]) / dist.holding)
    return abs(rho - best)

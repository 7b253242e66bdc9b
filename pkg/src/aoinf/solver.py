"""
Normalized relative value iteration for the transformed MDP
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .model import (
    ACTIONS,
    Action,
    Mode,
    ModelParams,
    Policy,
    StateSpace,
    SystemState,
    ValueFunction,
    remaining_visibility,
    transition_dist,
)
from .transform import (
    SMDPKernel,
    TransformConfig,
    TransformedMDP,
    build_smdp_kernel,
    transformed_dist,
)

logger = logging.getLogger(__name__)


def default_reference_state() -> SystemState:
    return SystemState.of(1, 0, False, 0)


@dataclass(frozen=True)
class SolveConfig:
    """
    RVI settings

    tie_tolerance is in per-slot units; it is multiplied by θ before comparing
    transformed action values so that tie-breaking does not depend on θ.
    """

    theta: TransformConfig = field(default_factory=TransformConfig)
    tolerance: float = 1e-9
    max_iterations: int = 200_000
    reference_state: SystemState = field(default_factory=default_reference_state)
    tie_tolerance: float = 1e-9
    log_every: int = 1000

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.tie_tolerance < 0:
            raise ValueError(f"tie_tolerance must be >= 0, got {self.tie_tolerance}")


@dataclass
class SolveReport:
    """Outcome of rvi_solve"""

    gain_per_slot: float
    transformed_gain: float
    values: ValueFunction
    policy: Policy
    iterations: int
    span_history: List[float]
    gain_bounds: Tuple[float, float]
    converged: bool
    theta: float
    bracket_history: List[float] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def final_span(self) -> float:
        return self.span_history[-1] if self.span_history else float("inf")

    @property
    def bracket_width(self) -> float:
        return self.gain_bounds[1] - self.gain_bounds[0]

    def summary(self) -> Dict[str, object]:
        return {
            "converged": self.converged,
            "gain_per_slot": self.gain_per_slot,
            "transformed_gain": self.transformed_gain,
            "theta": self.theta,
            "iterations": self.iterations,
            "final_span": self.final_span,
            "gain_bounds": list(self.gain_bounds),
            "bracket_width": self.bracket_width,
            "elapsed_seconds": self.elapsed,
        }


def q_value(
    state: SystemState, action: Action, V: ValueFunction, cfg: SolveConfig, params: ModelParams
) -> float:
    """R̄_θ(s, a) + Σ P̄_θ(s'|s, a) V(s') for a single state and action"""
    row = transformed_dist(state, action, cfg.theta, params, V.space)
    return row.cost + sum(p * V.values[j] for j, p in row.outcomes)


def smdp_q_value(
    state: SystemState, action: Action, V: ValueFunction, rho: float, params: ModelParams
) -> float:
    """R(Δ, a) − ρ L_a + E[V(s')]: the action value of the SMDP optimality equation"""
    dist = transition_dist(state, action, params)
    expected = sum(p * V[succ] for succ, p in dist.outcomes)
    return dist.cost - rho * dist.holding + expected


def _greedy(mdp: TransformedMDP, values: np.ndarray, tie_tolerance: float) -> np.ndarray:
    q = mdp.q_values(values)
    best = q.min(axis=0)
    # first action in canonical order within tolerance of the minimum
    return np.argmax(q <= best + tie_tolerance * mdp.theta, axis=0).astype(np.int8)


def extract_policy(
    V: ValueFunction, cfg: SolveConfig, params: ModelParams, mdp: Optional[TransformedMDP] = None
) -> Policy:
    """Greedy policy w.r.t. V with canonical tie-breaking"""
    if mdp is None:
        mdp = TransformedMDP.from_kernel(build_smdp_kernel(V.space), cfg.theta)
    return Policy(V.space, _greedy(mdp, V.values, cfg.tie_tolerance))


def solve_transformed(mdp: TransformedMDP, cfg: SolveConfig) -> SolveReport:
    """
    Run normalized RVI on an already built transformed MDP

    Each sweep reads only the previous iterate (Jacobi). The span of the normalized
    difference and of the unnormalized bracket are both recorded; they coincide up to
    rounding because the two differ by a constant.
    """
    space = mdp.space
    ref = space.index_of(cfg.reference_state)
    values = np.zeros(space.size)
    spans: List[float] = []
    brackets: List[float] = []
    lower = upper = offset = 0.0
    converged = False
    started = time.perf_counter()

    logger.info(
        "Solving %s with theta=%g, tolerance=%g", space, mdp.theta, cfg.tolerance
    )

    iteration = 0
    for iteration in range(1, cfg.max_iterations + 1):
        backed_up = mdp.q_values(values).min(axis=0)
        diff = backed_up - values
        lower, upper = float(diff.min()), float(diff.max())
        offset = float(backed_up[ref])
        updated = backed_up - offset

        span = float(np.ptp(updated - values))
        spans.append(span)
        brackets.append(upper - lower)
        values = updated

        if not np.isfinite(span):
            logger.error("RVI diverged at iteration %d", iteration)
            break
        if cfg.log_every and iteration % cfg.log_every == 0:
            logger.debug("iteration %d: span=%.3e gain~%.12g", iteration, span, offset)
        if span <= cfg.tolerance:
            converged = True
            break

    elapsed = time.perf_counter() - started
    if converged:
        logger.info(
            "Converged after %d iterations (%.2fs): gain per slot %.12g",
            iteration,
            elapsed,
            offset / mdp.theta,
        )
    else:
        logger.warning(
            "No convergence after %d iterations: last span %.3e", iteration, spans[-1]
        )

    value_fn = ValueFunction(space, values)
    return SolveReport(
        gain_per_slot=offset / mdp.theta,
        transformed_gain=offset,
        values=value_fn,
        policy=Policy(space, _greedy(mdp, values, cfg.tie_tolerance)),
        iterations=iteration,
        span_history=spans,
        gain_bounds=(lower, upper),
        converged=converged,
        theta=mdp.theta,
        bracket_history=brackets,
        elapsed=elapsed,
    )


def rvi_solve(
    params: ModelParams, cfg: SolveConfig, kernel: Optional[SMDPKernel] = None
) -> SolveReport:
    """
    Solve the average-cost SMDP through its transformed MDP

    Args:
        params: Model parameters
        cfg: Solver settings
        kernel: Prebuilt SMDP kernel to reuse (must match params)

    Returns:
        SolveReport; converged is False when max_iterations ran out
    """
    if kernel is None:
        kernel = build_smdp_kernel(StateSpace(params))
    elif kernel.params != params:
        raise ValueError("kernel was built for different model parameters")
    return solve_transformed(TransformedMDP.from_kernel(kernel, cfg.theta), cfg)


def _mode_of_column(column: int, space: StateSpace) -> Mode:
    phase, slot = divmod(column, space.block)
    return Mode(phase, slot > 0, max(slot - 1, 0))


@dataclass
class MonotonicityReport:
    """Pairs Δ₁ < Δ₂ with V(Δ₁, m) > V(Δ₂, m) + tol, one per offending (m, Δ₂)"""

    violations: List[Tuple[Mode, int, int, float]]
    worst_gap: float

    @property
    def ok(self) -> bool:
        return not self.violations


def check_monotonicity(
    V: ValueFunction, params: ModelParams, tol: float = 1e-8
) -> MonotonicityReport:
    """Check that V is nondecreasing in Δ for every fixed mode"""
    space = V.space
    grid = V.values.reshape(params.aoinf_cap, -1)
    running = np.maximum.accumulate(grid, axis=0)
    gaps = running - grid
    worst = float(gaps.max()) if gaps.size else 0.0

    violations = []
    for delta2_idx, column in zip(*np.nonzero(gaps > tol)):
        above = grid[: delta2_idx + 1, column]
        delta1_idx = int(np.argmax(above))
        violations.append(
            (
                _mode_of_column(int(column), space),
                delta1_idx + 1,
                int(delta2_idx) + 1,
                float(gaps[delta2_idx, column]),
            )
        )
    return MonotonicityReport(violations=violations, worst_gap=worst)


@dataclass
class ThresholdReport:
    """
    Tx-versus-compute cache-age thresholds

    thresholds maps (Δ, φ) to the largest τ of the tx-preferred prefix, −1 when empty.
    """

    thresholds: Dict[Tuple[int, int], int]
    violations: List[str]
    worst_decrease: float

    @property
    def ok(self) -> bool:
        return not self.violations


def smdp_q_table(kernel: SMDPKernel, values: np.ndarray, rho: float) -> np.ndarray:
    """|A|×|S| SMDP action values R − ρL + PV, +inf where infeasible"""
    n = kernel.space.size
    cont = (kernel.stacked @ values).reshape(len(ACTIONS), n)
    q = kernel.cost - rho * kernel.holding[:, None] + cont
    return np.where(kernel.feasible, q, np.inf)


def check_tx_compute_threshold(
    V: ValueFunction,
    gain: float,
    params: ModelParams,
    tol: float = 1e-8,
    kernel: Optional[SMDPKernel] = None,
) -> ThresholdReport:
    """
    Verify the cache-age threshold between cached transmission and recomputation

    For every (Δ, φ) where tx is feasible, D(τ) = Q(tx) − Q(compute) at (Δ, φ, 1, τ) must be
    nondecreasing in τ and {τ : D(τ) ≤ 0} must be a prefix of 0..Δ̂.
    """
    space = V.space
    kernel = kernel or build_smdp_kernel(space)
    q = smdp_q_table(kernel, V.values, gain)
    cap, period, block = params.aoinf_cap, params.period, space.block

    phases = [p for p in range(period) if remaining_visibility(p, params) >= params.tx_dur]
    shape = (cap, period, block)
    tx = q[Action.TX].reshape(shape)[:, phases, 1:]
    compute = q[Action.COMPUTE].reshape(shape)[:, phases, 1:]
    diff = tx - compute

    thresholds: Dict[Tuple[int, int], int] = {}
    violations: List[str] = []
    steps = np.diff(diff, axis=2)
    worst = float(max(0.0, -steps.min())) if steps.size else 0.0

    prefix = np.cumprod(diff <= 0.0, axis=2).sum(axis=2)
    for i in range(cap):
        for k, phase in enumerate(phases):
            delta = i + 1
            thresholds[(delta, phase)] = int(prefix[i, k]) - 1
            drops = np.flatnonzero(steps[i, k] < -tol)
            if drops.size:
                tau = int(drops[0])
                violations.append(
                    f"D decreases from τ={tau} to τ={tau + 1} at Δ={delta}, φ={phase} "
                    f"by {-steps[i, k, tau]:.3e}"
                )
            beyond = diff[i, k, prefix[i, k]:]
            if np.any(beyond < -tol):
                violations.append(
                    f"tx-preferred set is not a prefix at Δ={delta}, φ={phase}"
                )

    return ThresholdReport(thresholds=thresholds, violations=violations, worst_decrease=worst)

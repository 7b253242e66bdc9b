"""
Baseline policies, exact long-run evaluation and the policy-iteration certificate
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph
from scipy.sparse.linalg import spsolve

from .model import (
    ACTIONS,
    Action,
    InfeasibleActionError,
    ModelParams,
    Policy,
    StateSpace,
    SystemState,
    feasible_actions,
    initial_state,
    remaining_visibility,
)
from .transform import SMDPKernel, build_smdp_kernel

logger = logging.getLogger(__name__)

BASELINES = ("random", "onboard", "offload")


class SingularSystemError(RuntimeError):
    """Linear solve for a policy's stationary law or bias failed"""

    def __init__(self, message: str, size: int, closed_classes: int = 0):
        super().__init__(f"{message} (system size {size}, closed classes {closed_classes})")
        self.size = size
        self.closed_classes = closed_classes


class DecisionRule:
    """
    Stationary, possibly randomized, decision rule

    probs is an |S|×|A| row-stochastic matrix in canonical action order.
    """

    def __init__(self, space: StateSpace, probs: np.ndarray):
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (space.size, len(ACTIONS)):
            raise ValueError(f"expected shape {(space.size, len(ACTIONS))}, got {probs.shape}")
        if not np.allclose(probs.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("decision rule rows must sum to 1")
        self.space = space
        self.probs = probs

    @classmethod
    def from_policy(cls, policy: Policy) -> "DecisionRule":
        probs = np.zeros((policy.space.size, len(ACTIONS)))
        probs[np.arange(policy.space.size), policy.actions] = 1.0
        return cls(policy.space, probs)

    @property
    def is_deterministic(self) -> bool:
        return bool(np.all(self.probs.max(axis=1) == 1.0))

    def distribution(self, state: SystemState) -> Dict[Action, float]:
        row = self.probs[self.space.index_of(state)]
        return {a: float(row[a]) for a in ACTIONS if row[a] > 0}

    def choose(self, index: int, rng: np.random.Generator) -> Action:
        row = self.probs[index]
        if row.max() == 1.0:
            return Action(int(row.argmax()))
        return Action(int(rng.choice(len(ACTIONS), p=row)))


def as_decision_rule(policy: Union[Policy, DecisionRule]) -> DecisionRule:
    if isinstance(policy, DecisionRule):
        return policy
    return DecisionRule.from_policy(policy)


def feasibility_mask(space: StateSpace) -> np.ndarray:
    """|S|×|A| mask of feasible actions, vectorized feasible_actions"""
    allowed = np.zeros((space.size, len(ACTIONS)), dtype=bool)
    params = space.params
    residual = np.where(space.phase < params.window, params.window - space.phase, 0)
    allowed[:, Action.IDLE] = True
    allowed[:, Action.COMPUTE] = True
    allowed[:, Action.TX] = space.cache_full & (residual >= params.tx_dur)
    allowed[:, Action.OFFLOAD] = residual >= params.upload_dur
    return allowed


def random_policy(space: StateSpace) -> DecisionRule:
    """Uniform over the feasible actions of every state"""
    allowed = feasibility_mask(space)
    probs = allowed / allowed.sum(axis=1, keepdims=True)
    return DecisionRule(space, probs)


def onboard_policy(state: SystemState, params: ModelParams) -> Action:
    """Compute into an empty cache, transmit a cached summary when possible, else wait"""
    if not state.mode.cache_full:
        return Action.COMPUTE
    if Action.TX in feasible_actions(state.mode, params):
        return Action.TX
    return Action.IDLE


def offload_policy(state: SystemState, params: ModelParams) -> Action:
    """Offload raw data whenever the upload fits in the window, else wait"""
    if remaining_visibility(state.mode.phase, params) >= params.upload_dur:
        return Action.OFFLOAD
    return Action.IDLE


def tabulate(
    space: StateSpace, rule: Callable[[SystemState, ModelParams], Action]
) -> Policy:
    actions = np.fromiter(
        (rule(state, space.params) for state in space.states), dtype=np.int8, count=space.size
    )
    return Policy(space, actions)


def baseline(name: str, space: StateSpace) -> DecisionRule:
    if name == "random":
        return random_policy(space)
    if name == "onboard":
        return DecisionRule.from_policy(tabulate(space, onboard_policy))
    if name == "offload":
        return DecisionRule.from_policy(tabulate(space, offload_policy))
    raise ValueError(f"Unknown baseline {name!r}; expected one of {', '.join(BASELINES)}")


@dataclass
class EvaluationResult:
    """Exact long-run average AoInf per slot of a stationary policy"""

    average_aoinf_per_slot: float
    stationary_distribution: Dict[int, float]
    reachable_count: int
    closed_classes: int = 1
    class_gains: List[float] = field(default_factory=list)

    def summary(self) -> Dict[str, object]:
        return {
            "average_aoinf_per_slot": self.average_aoinf_per_slot,
            "reachable_count": self.reachable_count,
            "recurrent_count": len(self.stationary_distribution),
            "closed_classes": self.closed_classes,
            "class_gains": list(self.class_gains),
        }


def policy_chain(
    rule: DecisionRule, kernel: SMDPKernel
) -> Tuple[sp.csr_matrix, np.ndarray, np.ndarray]:
    """Embedded chain P_π with expected cost and holding time per state"""
    matrix = None
    for action in ACTIONS:
        weights = rule.probs[:, action]
        if not weights.any():
            continue
        part = sp.diags(weights, format="csr") @ kernel.matrices[action]
        matrix = part if matrix is None else matrix + part
    cost = (rule.probs * kernel.cost.T).sum(axis=1)
    holding = rule.probs @ kernel.holding.astype(float)
    return matrix.tocsr(), cost, holding


def _check_feasible(rule: DecisionRule, kernel: SMDPKernel, indices: np.ndarray):
    bad = (rule.probs[indices] > 0) & ~kernel.feasible.T[indices]
    if bad.any():
        row, action = np.argwhere(bad)[0]
        state = kernel.space.state_at(int(indices[row]))
        raise InfeasibleActionError(
            f"policy assigns {Action(int(action)).label} in state {state}, where it is infeasible"
        )


def closed_classes(matrix: sp.csr_matrix) -> Tuple[np.ndarray, List[np.ndarray]]:
    """
    Strongly connected components with no outgoing edges

    Returns:
        Tuple of (component label per node, list of node-index arrays of closed classes)
    """
    count, labels = csgraph.connected_components(matrix, directed=True, connection="strong")
    coo = matrix.tocoo()
    keep = coo.data > 0
    src, dst = labels[coo.row[keep]], labels[coo.col[keep]]
    leaking = np.zeros(count, dtype=bool)
    leaking[src[src != dst]] = True
    classes = [np.flatnonzero(labels == c) for c in np.flatnonzero(~leaking)]
    return labels, classes


def _stationary(matrix: sp.csr_matrix, members: np.ndarray) -> np.ndarray:
    """Stationary law of one closed class, solved with mu[0] pinned to 1 and then normalized"""
    sub = matrix[members][:, members]
    n = members.size
    # a dense normalization row fills in the LU factors; a pinned component keeps them sparse
    keep = np.ones(n)
    keep[0] = 0.0
    pin = sp.csr_matrix(([1.0], ([0], [0])), shape=(n, n))
    system = sp.diags(keep) @ (sp.identity(n, format="csr") - sub).T + pin
    rhs = np.zeros(n)
    rhs[0] = 1.0
    mu = np.atleast_1d(spsolve(system.tocsc(), rhs))
    total = mu.sum()
    if not np.all(np.isfinite(mu)) or total <= 0.0:
        raise SingularSystemError("stationary distribution solve failed", n)
    return mu / total


def evaluate_policy_exact(
    policy: Union[Policy, DecisionRule],
    params: ModelParams,
    start: Optional[SystemState] = None,
    kernel: Optional[SMDPKernel] = None,
) -> EvaluationResult:
    """
    Long-run average AoInf per slot of a stationary policy, in closed form

    Builds the embedded chain restricted to states reachable from start, finds the closed
    classes it can enter, and returns the renewal-reward ratio Σ μR / Σ μL of each class,
    weighted by the probability of being absorbed into it.

    Args:
        policy: Deterministic Policy or randomized DecisionRule
        params: Model parameters
        start: Initial state (default (Δ̂, 0, 0, 0))
        kernel: Prebuilt SMDP kernel to reuse

    Returns:
        EvaluationResult
    """
    rule = as_decision_rule(policy)
    kernel = kernel or build_smdp_kernel(rule.space)
    start = start or initial_state(params)
    origin = kernel.space.index_of(start)

    matrix, cost, holding = policy_chain(rule, kernel)
    reach = np.sort(
        csgraph.breadth_first_order(matrix, origin, directed=True, return_predecessors=False)
    )
    _check_feasible(rule, kernel, reach)

    sub = matrix[reach][:, reach]
    _, classes = closed_classes(sub)
    logger.debug("Evaluation: %d reachable states, %d closed classes", reach.size, len(classes))

    gains, laws = [], []
    for members in classes:
        mu = _stationary(sub, members)
        gains.append(float(mu @ cost[reach[members]] / (mu @ holding[reach[members]])))
        laws.append(mu)

    weights = _absorption(sub, classes, int(np.searchsorted(reach, origin)))

    distribution: Dict[int, float] = {}
    for weight, members, mu in zip(weights, classes, laws):
        if weight == 0.0:
            continue
        for j, m in zip(reach[members], mu):
            distribution[int(j)] = distribution.get(int(j), 0.0) + weight * float(m)

    return EvaluationResult(
        average_aoinf_per_slot=float(np.dot(weights, gains)),
        stationary_distribution=distribution,
        reachable_count=int(reach.size),
        closed_classes=len(classes),
        class_gains=gains,
    )


def _absorption(matrix: sp.csr_matrix, classes: List[np.ndarray], origin: int) -> np.ndarray:
    """Probability of ending up in each closed class when starting from origin"""
    weights = np.zeros(len(classes))
    for k, members in enumerate(classes):
        if origin in members:
            weights[k] = 1.0
            return weights
    if len(classes) == 1:
        weights[0] = 1.0
        return weights

    n = matrix.shape[0]
    recurrent = np.concatenate(classes)
    transient = np.setdiff1d(np.arange(n), recurrent)
    inflow = np.column_stack(
        [np.asarray(matrix[transient][:, members].sum(axis=1)).ravel() for members in classes]
    )
    system = sp.identity(transient.size, format="csc") - matrix[transient][:, transient]
    absorbed = spsolve(system.tocsc(), inflow)
    absorbed = np.atleast_2d(absorbed).reshape(transient.size, len(classes))
    if not np.all(np.isfinite(absorbed)):
        raise SingularSystemError("absorption solve failed", transient.size, len(classes))
    return absorbed[int(np.searchsorted(transient, origin))]


@dataclass
class CertificateReport:
    """
    Policy-iteration fixed-point check

    violations holds (state index, improving action, ratio-form improvement); closed
    classes whose gains differ by more than tol also fail the certificate.
    """

    gain: float
    violations: List[Tuple[int, Action, float]]
    worst_improvement: float
    closed_classes: int
    class_gains: List[float]
    gain_spread: float = 0.0
    tol: float = 1e-8

    @property
    def ok(self) -> bool:
        return not self.violations and self.gain_spread <= self.tol


def policy_bias(
    policy: Policy, kernel: SMDPKernel
) -> Tuple[float, np.ndarray, List[float], int]:
    """
    Gain and differential values of a deterministic policy on the whole space

    Every closed class is pinned to zero at its lowest-index state.

    Returns:
        Tuple of (gain, bias vector, per-class gains, number of closed classes)
    """
    rule = DecisionRule.from_policy(policy)
    _check_feasible(rule, kernel, np.arange(kernel.space.size))
    matrix, cost, holding = policy_chain(rule, kernel)
    _, classes = closed_classes(matrix)

    gains = []
    for members in classes:
        mu = _stationary(matrix, members)
        gains.append(float(mu @ cost[members] / (mu @ holding[members])))
    gain = float(np.mean(gains))

    n = kernel.space.size
    system = (sp.identity(n, format="csr") - matrix).tolil()
    rhs = cost - gain * holding
    for members in classes:
        pin = int(members[0])
        system.rows[pin] = [pin]
        system.data[pin] = [1.0]
        rhs[pin] = 0.0
    bias = spsolve(system.tocsc(), rhs)
    if not np.all(np.isfinite(bias)):
        raise SingularSystemError("bias solve failed", n, len(classes))
    return gain, bias, gains, len(classes)


def improvement_certificate(
    policy: Policy,
    params: ModelParams,
    tol: float = 1e-8,
    kernel: Optional[SMDPKernel] = None,
) -> CertificateReport:
    """
    Check that no single-state deviation improves the ratio-form action value

    Args:
        policy: Deterministic policy to certify
        params: Model parameters
        tol: Improvements up to tol are ignored
        kernel: Prebuilt SMDP kernel to reuse

    Returns:
        CertificateReport; class gains that differ by more than tol are a violation too
    """
    kernel = kernel or build_smdp_kernel(policy.space)
    gain, bias, gains, count = policy_bias(policy, kernel)

    ratio = kernel.ratio_q(bias)
    own = ratio[policy.actions, np.arange(policy.space.size)]
    best = ratio.min(axis=0)
    improvement = own - best
    offending = np.flatnonzero(improvement > tol)

    violations = [
        (int(s), Action(int(ratio[:, s].argmin())), float(improvement[s])) for s in offending
    ]
    spread = float(max(gains) - min(gains)) if gains else 0.0
    if spread > tol:
        logger.warning("Policy has closed classes with unequal gains: %s", gains)

    return CertificateReport(
        gain=gain,
        violations=violations,
        worst_improvement=float(max(0.0, improvement.max())),
        closed_classes=count,
        class_gains=gains,
        gain_spread=spread,
        tol=tol,
    )

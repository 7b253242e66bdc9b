"""
Verification context: model, kernels and lazily computed solutions
"""

from __future__ import annotations

import logging
from functools import cached_property
from typing import Dict

from .config import ExperimentConfig
from .model import ModelParams, Policy, StateSpace
from .policies import EvaluationResult, evaluate_policy_exact
from .solver import SolveReport, rvi_solve
from .transform import SMDPKernel, build_smdp_kernel, corrupt_kernel

logger = logging.getLogger(__name__)


class VerificationContext:
    """
    Everything the verification checks look at

    Solves are computed on first access and shared between checks. With fault injection
    enabled the solver runs on a corrupted kernel while `kernel` stays exact, so checks
    that recompute residuals on `kernel` see the damage.
    """

    def __init__(self, config: ExperimentConfig):
        """
        Initialize verification context

        Args:
            config: Experiment configuration (model, solver settings, start state)
        """
        self.config = config
        self.params: ModelParams = config.model
        self.space = StateSpace(self.params)
        self._theta_solutions: Dict[float, SolveReport] = {}

    @cached_property
    def kernel(self) -> SMDPKernel:
        return build_smdp_kernel(self.space)

    @cached_property
    def solve_kernel(self) -> SMDPKernel:
        if self.config.fault_injection:
            return corrupt_kernel(self.kernel)
        return self.kernel

    @cached_property
    def solution(self) -> SolveReport:
        logger.info("Solving %s for verification", self.space)
        report = rvi_solve(self.params, self.config.solve_config(), kernel=self.solve_kernel)
        self._theta_solutions[report.theta] = report
        return report

    @property
    def policy(self) -> Policy:
        return self.solution.policy

    @cached_property
    def evaluation(self) -> EvaluationResult:
        return evaluate_policy_exact(
            self.policy, self.params, self.config.start_state(), kernel=self.kernel
        )

    def theta_solution(self, theta: float) -> SolveReport:
        """Solve with a different θ (cached per θ)"""
        if theta == self.config.solver.theta:
            return self.solution
        if theta not in self._theta_solutions:
            logger.info("Solving with theta=%g", theta)
            self._theta_solutions[theta] = rvi_solve(
                self.params, self.config.solve_config(theta), kernel=self.solve_kernel
            )
        return self._theta_solutions[theta]

    def __str__(self):
        """String representation of context"""
        return (
            f"VerificationContext(states={self.space.size}, "
            f"fault_injection={self.config.fault_injection})"
        )

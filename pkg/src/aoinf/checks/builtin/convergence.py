"""
Checks on the RVI solve: convergence, agreement with exact evaluation and θ-invariance
"""

from typing import List

import numpy as np

from aoinf.check import Check, CheckViolation
from aoinf.context import VerificationContext


class SolverConvergedCheck(Check):
    """RVI met its span tolerance and the gain bracket is tight"""

    @property
    def check_id(self) -> str:
        return "solver-converged"

    @property
    def description(self) -> str:
        return "RVI must converge and bracket the gain within the solver tolerance"

    def check(self, context: VerificationContext) -> List[CheckViolation]:
        report = context.solution
        tol = self.option("tolerance", context.config.solver.tolerance)
        self.metrics = report.summary()

        violations = []
        if not report.converged:
            violations.append(
                self.violation(
                    f"no convergence after {report.iterations} iterations "
                    f"(last span {report.final_span:.3e})",
                    value=report.final_span,
                )
            )
        if report.bracket_width > tol:
            violations.append(
                self.violation(
                    f"gain bracket width {report.bracket_width:.3e} exceeds {tol:g}",
                    value=report.bracket_width,
                )
            )
        return violations


class GainMatchesEvaluationCheck(Check):
    """The solver's gain equals the exact long-run average of its own greedy policy"""

    @property
    def check_id(self) -> str:
        return "gain-matches-evaluation"

    @property
    def description(self) -> str:
        return "RVI gain must match the exact evaluation of the extracted policy"

    def check(self, context: VerificationContext) -> List[CheckViolation]:
        tol = self.option("tolerance", 1e-6)
        gain = context.solution.gain_per_slot
        exact = context.evaluation.average_aoinf_per_slot
        gap = abs(gain - exact)
        self.metrics = {"gain_per_slot": gain, "evaluated": exact, "gap": gap}

        if gap > tol:
            return [
                self.violation(
                    f"solver gain {gain:.12g} differs from exact evaluation {exact:.12g} "
                    f"by {gap:.3e}",
                    value=gap,
                )
            ]
        return []


class ThetaInvarianceCheck(Check):
    """Different uniformization constants give the same policy and per-slot gain"""

    @property
    def check_id(self) -> str:
        return "theta-invariance"

    @property
    def description(self) -> str:
        return "Optimal policy and per-slot gain must not depend on theta"

    def check(self, context: VerificationContext) -> List[CheckViolation]:
        thetas = [float(t) for t in self.config.get("thetas", [0.25, 0.5, 0.9])]
        tol = self.option("tolerance", 1e-6)
        if not thetas:
            return []

        reports = {theta: context.theta_solution(theta) for theta in thetas}
        base_theta = thetas[0]
        base = reports[base_theta]

        tie_tol = self.option("tie-tolerance", 1e-7)
        ratio = context.kernel.ratio_q(base.values.values)
        columns = np.arange(context.space.size)

        violations = []
        worst_gap, worst_mismatch, near_ties = 0.0, 0, 0
        for theta, report in reports.items():
            if not report.converged:
                violations.append(self.violation(f"solve with theta={theta:g} did not converge"))
            gap = abs(report.gain_per_slot - base.gain_per_slot)
            worst_gap = max(worst_gap, gap)
            if gap > tol:
                violations.append(
                    self.violation(
                        f"gain per slot {report.gain_per_slot:.12g} at theta={theta:g} differs "
                        f"from {base.gain_per_slot:.12g} at theta={base_theta:g}",
                        value=gap,
                    )
                )
            diff = report.policy.mismatches(base.policy)
            # mismatches between actions whose ratio-form values tie within tie_tol are benign
            gaps = np.abs(
                ratio[report.policy.actions[diff], columns[diff]]
                - ratio[base.policy.actions[diff], columns[diff]]
            )
            near_ties += int(np.count_nonzero(gaps <= tie_tol))
            diff = diff[gaps > tie_tol]
            worst_mismatch = max(worst_mismatch, int(diff.size))
            if diff.size:
                violations.append(
                    self.violation(
                        f"policy at theta={theta:g} differs from theta={base_theta:g} "
                        f"in {diff.size} states",
                        state=context.space.state_at(int(diff[0])),
                        value=float(diff.size),
                    )
                )

        self.metrics = {
            "thetas": thetas,
            "gains": {f"{t:g}": r.gain_per_slot for t, r in reports.items()},
            "worst_gain_gap": worst_gap,
            "worst_policy_mismatches": worst_mismatch,
            "near_tie_mismatches": near_ties,
        }
        return violations

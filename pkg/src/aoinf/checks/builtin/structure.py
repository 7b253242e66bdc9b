"""
Structural properties of the optimal value function and policy
"""

from typing import List

from aoinf.check import Check, CheckViolation
from aoinf.context import VerificationContext
from aoinf.model import SystemState
from aoinf.solver import check_monotonicity, check_tx_compute_threshold


class ValueMonotoneCheck(Check):
    """V is nondecreasing in AoInf for every fixed mode"""

    @property
    def check_id(self) -> str:
        return "value-monotone"

    @property
    def description(self) -> str:
        return "Differential values must be nondecreasing in AoInf for every mode"

    def check(self, context: VerificationContext) -> List[CheckViolation]:
        tol = self.option("tolerance", 1e-8)
        report = check_monotonicity(context.solution.values, context.params, tol)
        self.metrics = {"violations": len(report.violations), "worst_gap": report.worst_gap}

        return [
            self.violation(
                f"V({low}, m) exceeds V({high}, m) by {gap:.3e}",
                state=SystemState(high, mode),
                value=gap,
            )
            for mode, low, high, gap in report.violations[:50]
        ]


class TxComputeThresholdCheck(Check):
    """Cached transmission beats recomputation on a prefix of cache ages"""

    @property
    def check_id(self) -> str:
        return "tx-compute-threshold"

    @property
    def description(self) -> str:
        return "Tx-versus-compute advantage must be monotone in cache age with a prefix set"

    def check(self, context: VerificationContext) -> List[CheckViolation]:
        tol = self.option("tolerance", 1e-8)
        solution = context.solution
        report = check_tx_compute_threshold(
            solution.values, solution.gain_per_slot, context.params, tol, kernel=context.kernel
        )
        thresholds = list(report.thresholds.values())
        self.metrics = {
            "violations": len(report.violations),
            "worst_decrease": report.worst_decrease,
            "points": len(thresholds),
            "with_tx_prefix": sum(1 for t in thresholds if t >= 0),
        }
        return [self.violation(message) for message in report.violations[:50]]

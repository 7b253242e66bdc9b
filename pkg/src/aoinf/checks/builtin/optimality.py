"""
Optimality checks: ratio-form optimality equation and policy-iteration certificate
"""

from typing import List

import numpy as np

from aoinf.check import Check, CheckViolation
from aoinf.context import VerificationContext
from aoinf.policies import improvement_certificate
from aoinf.transform import ratio_form_residuals


class RatioFormResidualCheck(Check):
    """The transformed solution solves the SMDP optimality equation in ratio form"""

    @property
    def check_id(self) -> str:
        return "ratio-form-residual"

    @property
    def description(self) -> str:
        return "|rho - min_a (R + PV - V)/L| must vanish at every state"

    def check(self, context: VerificationContext) -> List[CheckViolation]:
        tol = self.option("tolerance", 1e-6)
        solution = context.solution
        residuals = ratio_form_residuals(
            context.kernel, solution.values.values, solution.gain_per_slot
        )
        worst = int(np.argmax(residuals))
        offending = np.flatnonzero(residuals > tol)
        self.metrics = {
            "worst_residual": float(residuals[worst]),
            "violations": int(offending.size),
        }

        if offending.size:
            return [
                self.violation(
                    f"ratio-form residual {residuals[worst]:.3e} exceeds {tol:g} "
                    f"({offending.size} states)",
                    state=context.space.state_at(worst),
                    value=float(residuals[worst]),
                )
            ]
        return []


class ImprovementCertificateCheck(Check):
    """No single-state deviation improves the extracted policy"""

    @property
    def check_id(self) -> str:
        return "improvement-certificate"

    @property
    def description(self) -> str:
        return "Policy iteration must not find an improving action for the optimal policy"

    def check(self, context: VerificationContext) -> List[CheckViolation]:
        tol = self.option("tolerance", 1e-8)
        report = improvement_certificate(
            context.policy, context.params, tol, kernel=context.kernel
        )
        self.metrics = {
            "gain": report.gain,
            "violations": len(report.violations),
            "worst_improvement": report.worst_improvement,
            "closed_classes": report.closed_classes,
            "gain_spread": report.gain_spread,
        }

        violations = [
            self.violation(
                f"{action.label} improves the policy by {improvement:.3e}",
                state=context.space.state_at(index),
                value=improvement,
            )
            for index, action, improvement in report.violations[:50]
        ]
        if report.gain_spread > tol:
            violations.append(
                self.violation(
                    f"closed classes have unequal gains {report.class_gains}",
                    value=report.gain_spread,
                )
            )
        return violations

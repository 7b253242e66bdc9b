"""
Checks for the SMDP and transformed transition kernels
"""

from typing import List

import numpy as np

from aoinf.check import Check, CheckViolation
from aoinf.context import VerificationContext
from aoinf.model import ACTIONS, is_admissible, transition_dist
from aoinf.transform import TransformedMDP


class KernelRowsStochasticCheck(Check):
    """Every feasible row is a probability distribution over admissible states"""

    @property
    def check_id(self) -> str:
        return "kernel-rows-stochastic"

    @property
    def description(self) -> str:
        return "Transition rows must be nonnegative, sum to 1 and reach only admissible states"

    def check(self, context: VerificationContext) -> List[CheckViolation]:
        violations = []
        tol = self.option("tolerance", 1e-12)
        sample = self.option("sample", 200)
        kernel = context.kernel
        transformed = TransformedMDP.from_kernel(kernel, context.config.solve_config().theta)

        worst = 0.0
        for label, matrices in (("SMDP", kernel.matrices), ("transformed", transformed.matrices)):
            for action in ACTIONS:
                matrix = matrices[action]
                feasible = kernel.feasible[action]
                sums = np.asarray(matrix.sum(axis=1)).ravel()

                if matrix.data.size and matrix.data.min() < 0:
                    violations.append(
                        self.violation(f"{label} {action.label} rows carry negative mass")
                    )

                errors = np.abs(sums[feasible] - 1.0)
                if errors.size:
                    worst = max(worst, float(errors.max()))
                for index in np.flatnonzero(feasible)[errors > tol][:10]:
                    violations.append(
                        self.violation(
                            f"{label} {action.label} row sums to {sums[index]:.15g}",
                            state=context.space.state_at(int(index)),
                            value=float(sums[index]),
                        )
                    )

                if np.any(np.diff(matrix.indptr)[~feasible]):
                    violations.append(
                        self.violation(f"{label} {action.label} has mass on infeasible rows")
                    )

                if matrix.indices.size and (
                    matrix.indices.min() < 0 or matrix.indices.max() >= context.space.size
                ):
                    violations.append(
                        self.violation(f"{label} {action.label} points outside the state space")
                    )

        # spot-check the vectorized kernel against the scalar transition rule
        mismatches = inadmissible = 0
        picks = np.unique(np.linspace(0, context.space.size - 1, num=max(1, sample), dtype=int))
        for index in picks:
            state = context.space.state_at(int(index))
            for action in ACTIONS:
                if not kernel.feasible[action, index]:
                    continue
                dist = transition_dist(state, action, context.params)
                outside = [s for s, _ in dist.outcomes if not is_admissible(s, context.params)]
                if outside:
                    inadmissible += len(outside)
                    violations.append(
                        self.violation(
                            f"{action.label} has inadmissible successor {outside[0]}",
                            state=state,
                        )
                    )
                    continue
                expected = {context.space.index_of(s): p for s, p in dist.outcomes}
                row = kernel.row(int(index), action)
                same = set(row) == set(expected) and all(
                    abs(row[j] - expected[j]) <= tol for j in expected
                )
                if not same or kernel.cost[action, index] != dist.cost:
                    mismatches += 1
                    violations.append(
                        self.violation(
                            f"kernel row for {action.label} disagrees with transition_dist",
                            state=state,
                        )
                    )

        self.metrics = {
            "worst_row_error": worst,
            "states": context.space.size,
            "spot_checked_states": int(picks.size),
            "spot_check_mismatches": mismatches,
            "inadmissible_successors": inadmissible,
        }
        return violations

"""
Builtin verification checks for the average-cost solver
"""

from .kernel import (
    KernelRowsStochasticCheck,
)

from .convergence import (
    SolverConvergedCheck,
    GainMatchesEvaluationCheck,
    ThetaInvarianceCheck,
)

from .structure import (
    ValueMonotoneCheck,
    TxComputeThresholdCheck,
)

from .optimality import (
    RatioFormResidualCheck,
    ImprovementCertificateCheck,
)

# All builtin checks, in report order
BUILTIN_CHECKS = [
    # Kernel
    KernelRowsStochasticCheck,
    # Solve
    SolverConvergedCheck,
    GainMatchesEvaluationCheck,
    # Structure
    ValueMonotoneCheck,
    TxComputeThresholdCheck,
    # Optimality
    ThetaInvarianceCheck,
    RatioFormResidualCheck,
    ImprovementCertificateCheck,
]


__all__ = [
    "BUILTIN_CHECKS",
    "KernelRowsStochasticCheck",
    "SolverConvergedCheck",
    "GainMatchesEvaluationCheck",
    "ThetaInvarianceCheck",
    "ValueMonotoneCheck",
    "TxComputeThresholdCheck",
    "RatioFormResidualCheck",
    "ImprovementCertificateCheck",
]

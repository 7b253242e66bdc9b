"""
aoinf - Average-cost scheduling of onboard inference and offloading under contact windows
"""

__version__ = "0.1.0"

from .model import (
    Action,
    DomainError,
    InfeasibleActionError,
    ModelParams,
    Mode,
    Policy,
    StateSpace,
    SystemState,
    ValueFunction,
)
from .transform import TransformConfig
from .solver import SolveConfig, SolveReport, rvi_solve
from .policies import (
    DecisionRule,
    SingularSystemError,
    evaluate_policy_exact,
    improvement_certificate,
)
from .simulation import TrajectoryLog, simulate
from .check import Check, CheckViolation, Severity
from .config import ExperimentConfig

__all__ = [
    "__version__",
    "Action",
    "DomainError",
    "InfeasibleActionError",
    "ModelParams",
    "Mode",
    "Policy",
    "StateSpace",
    "SystemState",
    "ValueFunction",
    "TransformConfig",
    "SolveConfig",
    "SolveReport",
    "rvi_solve",
    "DecisionRule",
    "SingularSystemError",
    "evaluate_policy_exact",
    "improvement_certificate",
    "TrajectoryLog",
    "simulate",
    "Check",
    "CheckViolation",
    "Severity",
    "ExperimentConfig",
]

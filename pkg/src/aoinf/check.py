"""
Base classes for verification checks
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Any, Dict, List, Optional

from .model import SystemState

if TYPE_CHECKING:
    from .context import VerificationContext


class Severity(Enum):
    """Check violation severity levels"""

    ERROR = "error"
    WARNING = "warning"
    INFO = "info"


@dataclass
class CheckViolation:
    """Represents a failed property"""

    check_id: str
    severity: Severity
    message: str
    state: Optional[SystemState] = None
    value: Optional[float] = None

    def __str__(self):
        """Format violation for display"""
        icon = {Severity.ERROR: "✗", Severity.WARNING: "⚠", Severity.INFO: "ℹ"}[self.severity]

        location = f" [{self.check_id}]"
        if self.state is not None:
            location = f" [{self.check_id} at {self.state}]"

        return f"{icon} {self.severity.value.upper()}{location}: {self.message}"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "severity": self.severity.value,
            "message": self.message,
            "state": list(self.state.as_tuple()) if self.state is not None else None,
            "value": self.value,
        }


class Check(ABC):
    """Base class for verification checks"""

    def __init__(self, config: Optional[Dict[str, Any]] = None):
        """
        Initialize check with optional configuration

        Args:
            config: Check-specific configuration from the `checks:` section of aoinf.yaml
        """
        self.config = config or {}
        self._enabled = self.config.get("enabled", True)

        severity_str = self.config.get("severity", self.default_severity().value)
        self._severity = Severity(severity_str)
        self.metrics: Dict[str, Any] = {}

    @property
    @abstractmethod
    def check_id(self) -> str:
        """Unique identifier for this check (e.g., 'value-monotone')"""
        pass

    @property
    @abstractmethod
    def description(self) -> str:
        """Human-readable description of the verified property"""
        pass

    def default_severity(self) -> Severity:
        return Severity.ERROR

    @property
    def enabled(self) -> bool:
        return self._enabled

    @property
    def severity(self) -> Severity:
        return self._severity

    def option(self, name: str, default: Any) -> Any:
        """Per-check option from the config, e.g. `tolerance`"""
        value = self.config.get(name, default)
        return type(default)(value) if isinstance(default, (int, float)) else value

    @abstractmethod
    def check(self, context: "VerificationContext") -> List[CheckViolation]:
        """
        Execute the check

        Args:
            context: Verification context with the model, kernel and cached solves

        Returns:
            List of violations found; metrics is filled as a side effect
        """
        pass

    def violation(
        self,
        message: str,
        state: Optional[SystemState] = None,
        value: Optional[float] = None,
        severity: Optional[Severity] = None,
    ) -> CheckViolation:
        """
        Create a violation for this check

        Args:
            message: Violation message
            state: Optional state where the property fails
            value: Optional offending residual or gap
            severity: Override severity (defaults to the check's configured severity)

        Returns:
            CheckViolation instance
        """
        return CheckViolation(
            check_id=self.check_id,
            severity=severity if severity is not None else self.severity,
            message=message,
            state=state,
            value=value,
        )

"""
Verification orchestration
"""

import logging
from typing import Any, Dict, List, Optional, Tuple

from .check import Check, CheckViolation, Severity
from .config import ExperimentConfig
from .context import VerificationContext

logger = logging.getLogger(__name__)


class Verifier:
    """
    Runs the builtin checks against one configuration
    """

    def __init__(self, context: VerificationContext, config: Optional[ExperimentConfig] = None):
        """
        Initialize verifier

        Args:
            context: Verification context
            config: Configuration whose `checks:` section selects checks
                (defaults to the context's configuration)
        """
        self.context = context
        self.config = config or context.config
        self.checks: List[Check] = []
        self._load_checks()

    def _load_checks(self):
        """Load all enabled builtin checks"""
        from .checks.builtin import BUILTIN_CHECKS

        for check_class in BUILTIN_CHECKS:
            # check_id is a property, so instantiate first
            check = check_class()
            config = self.config.get_check_config(check.check_id)
            if config:
                check = check_class(config)

            if self.config.is_check_enabled(check.check_id):
                self.checks.append(check)

    def run(self) -> List[CheckViolation]:
        """
        Run all enabled checks

        An exception inside a check becomes an ERROR violation of that check; the
        remaining checks still run.

        Returns:
            List of all violations found
        """
        violations = []

        for check in self.checks:
            logger.info("Running check %s", check.check_id)
            try:
                violations.extend(check.check(self.context))
            except Exception as e:
                logger.error("Error running check %s: %s", check.check_id, e)
                message = f"check raised {type(e).__name__}: {e}"
                violations.append(check.violation(message, severity=Severity.ERROR))

        return violations

    def get_counts(self, violations: List[CheckViolation]) -> Tuple[int, int, int]:
        """
        Count violations by severity

        Args:
            violations: List of violations

        Returns:
            Tuple of (errors, warnings, info)
        """
        errors = sum(1 for v in violations if v.severity == Severity.ERROR)
        warnings = sum(1 for v in violations if v.severity == Severity.WARNING)
        info = sum(1 for v in violations if v.severity == Severity.INFO)
        return errors, warnings, info

    def report(self, violations: List[CheckViolation]) -> Dict[str, Any]:
        """JSON-ready pass/fail report keyed by check id"""
        errors, warnings, info = self.get_counts(violations)
        checks = {}
        for check in self.checks:
            own = [v for v in violations if v.check_id == check.check_id]
            checks[check.check_id] = {
                "passed": not any(v.severity == Severity.ERROR for v in own),
                "severity": check.severity.value,
                "description": check.description,
                "violations": [v.to_dict() for v in own],
                "metrics": check.metrics,
            }
        return {
            "passed": errors == 0,
            "counts": {"errors": errors, "warnings": warnings, "info": info},
            "fault_injection": self.config.fault_injection,
            "checks": checks,
        }

    def format_results(self, violations: List[CheckViolation], verbose: bool = False) -> str:
        """
        Format violations for display

        Args:
            violations: List of violations
            verbose: Show info-level messages and per-check status

        Returns:
            Formatted string
        """
        errors, warnings, info = self.get_counts(violations)

        errors_list = [v for v in violations if v.severity == Severity.ERROR]
        warnings_list = [v for v in violations if v.severity == Severity.WARNING]
        info_list = [v for v in violations if v.severity == Severity.INFO]

        output = []

        if verbose:
            failed = {v.check_id for v in errors_list}
            output.append("\033[1mChecks:\033[0m")
            for check in self.checks:
                mark = "\033[91m✗\033[0m" if check.check_id in failed else "\033[92m✓\033[0m"
                output.append(f"  {mark} {check.check_id}")

        if errors_list:
            output.append("\n\033[91m\033[1mErrors:\033[0m")
            for v in errors_list:
                output.append(f"  {v}")

        if warnings_list:
            output.append("\n\033[93m\033[1mWarnings:\033[0m")
            for v in warnings_list:
                output.append(f"  {v}")

        if verbose and info_list:
            output.append("\n\033[94m\033[1mInfo:\033[0m")
            for v in info_list:
                output.append(f"  {v}")

        output.append("\n\033[1mSummary:\033[0m")
        output.append(f"  \033[91mErrors:   {errors}\033[0m")
        output.append(f"  \033[93mWarnings: {warnings}\033[0m")
        if verbose:
            output.append(f"  \033[94mInfo:     {info}\033[0m")

        if errors == 0 and warnings == 0:
            output.append("\n\033[92m\033[1m✓ All checks passed!\033[0m")

        return "\n".join(output)

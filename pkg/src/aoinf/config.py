"""
Configuration management for aoinf experiments
"""

from __future__ import annotations

import copy
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import yaml

from .model import ModelParams, SystemState, initial_state, is_admissible
from .solver import SolveConfig
from .transform import TransformConfig

CONFIG_NAMES = ("aoinf.yaml", "aoinf.yml")
OUTPUT_FORMATS = ("csv", "json")
DEFAULT_GRID = [0.2, 0.4, 0.6, 0.8]


def _kebab(name: str) -> str:
    return str(name).replace("_", "-")


def _state_tuple(value: Any, name: str) -> Tuple[int, int, int, int]:
    try:
        items = tuple(int(v) for v in value)
    except (TypeError, ValueError):
        raise ValueError(f"{name} must be a list [aoinf, phase, cache-full, cache-age]")
    if len(items) != 4:
        raise ValueError(f"{name} must have 4 entries, got {len(items)}")
    return items  # type: ignore[return-value]


@dataclass
class SolverSettings:
    """RVI settings as written in the config file"""

    theta: float = 0.5
    tolerance: float = 1e-9
    max_iterations: int = 200_000
    reference_state: Tuple[int, int, int, int] = (1, 0, 0, 0)
    tie_tolerance: float = 1e-9
    log_every: int = 1000

    def __post_init__(self):
        # PyYAML reads "1e-9" as a string
        self.theta = float(self.theta)
        self.tolerance = float(self.tolerance)
        self.tie_tolerance = float(self.tie_tolerance)
        self.max_iterations = int(self.max_iterations)
        self.log_every = int(self.log_every)
        self.reference_state = _state_tuple(self.reference_state, "reference-state")

    def to_solve_config(self, theta: Optional[float] = None) -> SolveConfig:
        return SolveConfig(
            theta=TransformConfig(self.theta if theta is None else theta),
            tolerance=self.tolerance,
            max_iterations=self.max_iterations,
            reference_state=SystemState.of(*self.reference_state),
            tie_tolerance=self.tie_tolerance,
            log_every=self.log_every,
        )


@dataclass
class SweepSettings:
    p_tx: List[float] = field(default_factory=lambda: list(DEFAULT_GRID))
    p_offload: List[float] = field(default_factory=lambda: list(DEFAULT_GRID))

    def __post_init__(self):
        self.p_tx = [float(p) for p in self.p_tx]
        self.p_offload = [float(p) for p in self.p_offload]

    @property
    def points(self) -> List[Tuple[float, float]]:
        return [(pt, po) for pt in self.p_tx for po in self.p_offload]


@dataclass
class SimulationSettings:
    horizon: int = 100_000
    seeds: List[int] = field(default_factory=lambda: [7])
    warmup: int = 0

    def __post_init__(self):
        self.horizon = int(self.horizon)
        self.warmup = int(self.warmup)
        self.seeds = [int(s) for s in self.seeds]
        if self.horizon < 1:
            raise ValueError(f"simulation horizon must be >= 1, got {self.horizon}")
        if not self.seeds:
            raise ValueError("simulation seeds must not be empty")
        if not 0 <= self.warmup < self.horizon:
            raise ValueError(
                f"simulation warmup must lie in [0, {self.horizon}), got {self.warmup}"
            )


def _section(cls, data: Any, name: str):
    """Build a settings dataclass from a kebab-case mapping"""
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ValueError(f"'{name}' must be a mapping")
    known = {_kebab(f.name): f.name for f in dataclasses.fields(cls)}
    unknown = sorted(k for k in map(_kebab, data) if k not in known)
    if unknown:
        raise ValueError(f"Unknown key(s) in '{name}': {', '.join(unknown)}")
    return cls(**{known[_kebab(k)]: v for k, v in data.items()})


def _section_dict(obj) -> Dict[str, Any]:
    result = {}
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        result[_kebab(f.name)] = list(value) if isinstance(value, (tuple, list)) else value
    return result


@dataclass
class ExperimentConfig:
    """Configuration for solve / evaluate / simulate / sweep / verify runs"""

    model: ModelParams = field(default_factory=ModelParams)
    solver: SolverSettings = field(default_factory=SolverSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    start: Optional[Tuple[int, int, int, int]] = None
    output_dir: Path = Path("results")
    output_formats: List[str] = field(default_factory=lambda: list(OUTPUT_FORMATS))
    workers: int = 1
    checks: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    fault_injection: bool = False

    @classmethod
    def from_dict(cls, data: Dict[str, Any], source: str = "<config>") -> "ExperimentConfig":
        """
        Build and validate a configuration from a parsed YAML mapping

        Raises:
            ValueError: naming the source and the violated invariant
        """
        data = {_kebab(k): v for k, v in (data or {}).items()}
        known = {_kebab(f.name) for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        try:
            if unknown:
                raise ValueError(f"Unknown key(s): {', '.join(unknown)}")
            config = cls(
                model=_section(ModelParams, data.get("model"), "model"),
                solver=_section(SolverSettings, data.get("solver"), "solver"),
                sweep=_section(SweepSettings, data.get("sweep"), "sweep"),
                simulation=_section(SimulationSettings, data.get("simulation"), "simulation"),
                start=(
                    _state_tuple(data["start"], "start") if data.get("start") is not None else None
                ),
                output_dir=Path(data.get("output-dir", "results")),
                output_formats=list(data.get("output-formats", OUTPUT_FORMATS)),
                workers=int(data.get("workers", 1)),
                checks=dict(data.get("checks") or {}),
                fault_injection=bool(data.get("fault-injection", False)),
            )
            config.validate()
        except (TypeError, ValueError) as e:
            raise ValueError(f"Invalid config {source}: {e}")
        return config

    @classmethod
    def from_file(
        cls, config_path: Path, overrides: Sequence[str] = ()
    ) -> "ExperimentConfig":
        """
        Load configuration from an aoinf.yaml file

        Args:
            config_path: Path to configuration file
            overrides: `key.path=value` strings applied before validation

        Returns:
            ExperimentConfig instance
        """
        if not config_path.exists():
            raise ValueError(f"Config file not found: {config_path}")

        try:
            with open(config_path, "r") as f:
                data = yaml.safe_load(f) or {}
        except (yaml.YAMLError, IOError) as e:
            raise ValueError(f"Failed to load config from {config_path}: {e}")

        if not isinstance(data, dict):
            raise ValueError(f"Failed to load config from {config_path}: not a mapping")
        return cls.from_dict(apply_overrides(data, overrides), source=str(config_path))

    @classmethod
    def default(cls) -> "ExperimentConfig":
        """Baseline parameters with every builtin check enabled"""
        return cls(
            checks={
                "kernel-rows-stochastic": {
                    "enabled": True,
                    "severity": "error",
                    "tolerance": 1e-12,
                },
                "solver-converged": {"enabled": True, "severity": "error"},
                "gain-matches-evaluation": {
                    "enabled": True,
                    "severity": "error",
                    "tolerance": 1e-6,
                },
                "value-monotone": {"enabled": True, "severity": "error", "tolerance": 1e-8},
                "tx-compute-threshold": {
                    "enabled": True,
                    "severity": "error",
                    "tolerance": 1e-8,
                },
                "theta-invariance": {
                    "enabled": True,
                    "severity": "error",
                    "thetas": [0.25, 0.5, 0.9],
                    "tolerance": 1e-6,
                },
                "ratio-form-residual": {
                    "enabled": True,
                    "severity": "error",
                    "tolerance": 1e-6,
                },
                "improvement-certificate": {
                    "enabled": True,
                    "severity": "error",
                    "tolerance": 1e-8,
                },
            }
        )

    def validate(self):
        if self.start is not None and not is_admissible(
            SystemState.of(*self.start), self.model
        ):
            raise ValueError(f"start state {list(self.start)} is not admissible")
        if not is_admissible(SystemState.of(*self.solver.reference_state), self.model):
            raise ValueError(
                f"reference-state {list(self.solver.reference_state)} is not admissible"
            )
        bad = sorted(set(self.output_formats) - set(OUTPUT_FORMATS))
        if bad:
            raise ValueError(f"Unknown output format(s): {', '.join(bad)}")
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        for p in self.sweep.p_tx + self.sweep.p_offload:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"sweep probabilities must lie in [0, 1], got {p}")
        self.solver.to_solve_config()

    def solve_config(self, theta: Optional[float] = None) -> SolveConfig:
        return self.solver.to_solve_config(theta)

    def start_state(self, params: Optional[ModelParams] = None) -> SystemState:
        params = params or self.model
        if self.start is None:
            return initial_state(params)
        return SystemState.of(*self.start)

    def get_check_config(self, check_id: str) -> Dict[str, Any]:
        """
        Get configuration for a specific check

        Args:
            check_id: Check identifier

        Returns:
            Check configuration dict
        """
        return self.checks.get(check_id, {})

    def is_check_enabled(self, check_id: str) -> bool:
        return bool(self.get_check_config(check_id).get("enabled", True))

    def to_dict(self) -> Dict[str, Any]:
        """Convert config to dictionary for serialization"""
        return {
            "model": {_kebab(k): v for k, v in self.model.to_dict().items()},
            "solver": _section_dict(self.solver),
            "sweep": _section_dict(self.sweep),
            "simulation": _section_dict(self.simulation),
            "start": list(self.start) if self.start is not None else None,
            "output-dir": str(self.output_dir),
            "output-formats": list(self.output_formats),
            "workers": self.workers,
            "checks": self.checks,
            "fault-injection": self.fault_injection,
        }

    def save(self, config_path: Path):
        """Save configuration to file"""
        with open(config_path, "w") as f:
            yaml.dump(self.to_dict(), f, default_flow_style=False, sort_keys=False)


def apply_overrides(data: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """
    Apply dotted-path `--set` overrides to a raw config mapping

    Values are parsed as YAML, so `--set sweep.p-tx=[0.3,0.5]` sets a list.

    Args:
        data: Parsed config mapping (not modified)
        overrides: Strings of the form `section.key=value`

    Returns:
        New mapping with the overrides applied
    """
    result = copy.deepcopy(data) if data else {}
    for item in overrides:
        path, sep, raw = item.partition("=")
        if not sep or not path.strip():
            raise ValueError(f"Invalid override {item!r}: expected key=value")
        keys = [_kebab(k.strip()) for k in path.split(".")]
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as e:
            raise ValueError(f"Invalid override {item!r}: {e}")

        node = result
        for key in keys[:-1]:
            child = node.get(key)
            if child is None:
                child = node[key] = {}
            elif not isinstance(child, dict):
                raise ValueError(f"Invalid override {item!r}: '{key}' is not a section")
            node = child
        node[keys[-1]] = value
    return result


def load_config(
    config_path: Optional[Path] = None, overrides: Sequence[str] = ()
) -> ExperimentConfig:
    """Load an explicit config file, else a discovered one, else the defaults"""
    path = config_path or find_config(Path.cwd())
    if path is not None:
        return ExperimentConfig.from_file(path, overrides)
    data = apply_overrides(ExperimentConfig.default().to_dict(), overrides)
    return ExperimentConfig.from_dict(data, source="<defaults>")


def find_config(start_path: Path) -> Optional[Path]:
    """
    Find aoinf.yaml by walking up the directory tree

    Args:
        start_path: Starting directory

    Returns:
        Path to config file, or None if not found
    """
    current = start_path.resolve()

    while current != current.parent:
        for name in CONFIG_NAMES:
            config_file = current / name
            if config_file.exists():
                return config_file
        current = current.parent

    return None

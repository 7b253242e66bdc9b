"""
Result persistence: plot-ready CSV tables, JSON reports and policy-file loading
"""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List

import numpy as np
import pandas as pd

from .model import ACTIONS, Action, DomainError, ModelParams, Policy, StateSpace, ValueFunction
from .policies import feasibility_mask
from .simulation import TrajectoryLog

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"
STATE_COLUMNS = ["aoinf", "phase", "cache_full", "cache_age"]
TRACE_COLUMNS = ["slot", "aoinf", "cache_age", "visible_flag", "action_in_progress"]
EVENT_COLUMNS = ["generated_at", "delivered_at", "success", "kind"]
SWEEP_COLUMNS = ["p_tx", "p_offload", "gain_opt", "gain_random", "gain_onboard", "gain_offload"]


class PolicyFileError(ValueError):
    """Missing or ill-formed policy table"""


def round_sig(value: Any) -> Any:
    """Round floats (recursively) to 12 significant digits; non-finite floats become None"""
    if isinstance(value, dict):
        return {str(k): round_sig(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_sig(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float):
        if not math.isfinite(value):
            return None
        return float(f"{value:.12g}")
    if isinstance(value, Path):
        return str(value)
    return value


def write_json(data: Dict[str, Any], path: Path) -> Path:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(round_sig(data), f, indent=2, ensure_ascii=False)
        f.write("\n")
    logger.info("Wrote %s", path)
    return path


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(
        path, index=False, float_format=FLOAT_FORMAT, encoding="utf-8", lineterminator="\n"
    )
    logger.info("Wrote %s (%d rows)", path, len(frame))
    return path


def state_frame(space: StateSpace) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "aoinf": space.aoinf,
            "phase": space.phase,
            "cache_full": space.cache_full.astype(int),
            "cache_age": space.cache_age,
        }
    )


def policy_frame(policy: Policy) -> pd.DataFrame:
    frame = state_frame(policy.space)
    labels = np.array([a.label for a in ACTIONS])
    frame["action"] = labels[policy.actions]
    return frame


def values_frame(values: ValueFunction) -> pd.DataFrame:
    frame = state_frame(values.space)
    frame["value"] = values.values
    return frame


def _read_state_table(path: Path, column: str, params: ModelParams) -> pd.DataFrame:
    """Read a per-state table and return it sorted into state-index order"""
    if not path.exists():
        raise PolicyFileError(f"File not found: {path}")
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise PolicyFileError(f"Failed to read {path}: {e}")

    missing = [c for c in STATE_COLUMNS + [column] if c not in frame.columns]
    if missing:
        raise PolicyFileError(f"{path} lacks column(s): {', '.join(missing)}")

    space = StateSpace(params)
    if len(frame) != space.size:
        raise PolicyFileError(f"{path} has {len(frame)} rows, expected {space.size}")

    try:
        parts = {c: frame[c].to_numpy(dtype=np.int64) for c in STATE_COLUMNS}
    except (TypeError, ValueError) as e:
        raise PolicyFileError(f"{path} has non-integer state columns: {e}")

    admissible = (
        (parts["aoinf"] >= 1)
        & (parts["aoinf"] <= params.aoinf_cap)
        & (parts["phase"] >= 0)
        & (parts["phase"] < params.period)
        & np.isin(parts["cache_full"], (0, 1))
        & (parts["cache_age"] >= 0)
        & (parts["cache_age"] <= params.aoinf_cap)
        & ((parts["cache_full"] == 1) | (parts["cache_age"] == 0))
    )
    if not admissible.all():
        row = int(np.flatnonzero(~admissible)[0])
        raise PolicyFileError(f"{path} row {row + 2} is not an admissible state")

    index = space.indices(
        parts["aoinf"], parts["phase"], parts["cache_full"] == 1, parts["cache_age"]
    )
    if np.unique(index).size != space.size:
        raise PolicyFileError(f"{path} does not list every state exactly once")

    frame = frame.assign(_index=index).sort_values("_index")
    return frame


def load_policy(path: Path, params: ModelParams) -> Policy:
    """
    Load a policy table written by `aoinf solve`

    Args:
        path: policy.csv with columns aoinf, phase, cache_full, cache_age, action
        params: Model parameters the table was computed for

    Returns:
        Policy

    Raises:
        PolicyFileError: missing file, bad columns, incomplete state coverage, unknown or
            infeasible actions
    """
    path = Path(path)
    frame = _read_state_table(path, "action", params)
    try:
        actions = np.array([Action.from_label(a) for a in frame["action"]], dtype=np.int8)
    except DomainError as e:
        raise PolicyFileError(f"{path}: {e}")

    policy = Policy(StateSpace(params), actions)
    allowed = feasibility_mask(policy.space)
    bad = ~allowed[np.arange(policy.space.size), policy.actions]
    if bad.any():
        state = policy.space.state_at(int(np.flatnonzero(bad)[0]))
        raise PolicyFileError(f"{path} assigns an infeasible action in state {state}")

    logger.info("Loaded policy from %s", path)
    return policy


def load_values(path: Path, params: ModelParams) -> ValueFunction:
    path = Path(path)
    frame = _read_state_table(path, "value", params)
    try:
        values = frame["value"].to_numpy(dtype=float)
    except (TypeError, ValueError) as e:
        raise PolicyFileError(f"{path} has non-numeric values: {e}")
    return ValueFunction(StateSpace(params), values)


def trace_frame(log: TrajectoryLog) -> pd.DataFrame:
    labels = np.array([a.label for a in ACTIONS])
    return pd.DataFrame(
        {
            "slot": np.arange(log.horizon),
            "aoinf": log.per_slot_aoinf,
            "cache_age": log.cache_age_per_slot,
            "visible_flag": log.visible_per_slot.astype(int),
            "action_in_progress": labels[log.action_per_slot],
        },
        columns=TRACE_COLUMNS,
    )


def events_frame(log: TrajectoryLog) -> pd.DataFrame:
    rows = [
        (e.generated_at, e.delivered_at, int(e.success), e.kind.label) for e in log.update_events
    ]
    return pd.DataFrame(rows, columns=EVENT_COLUMNS)


def sweep_frame(rows: Iterable[Dict[str, Any]]) -> pd.DataFrame:
    return pd.DataFrame(list(rows), columns=SWEEP_COLUMNS)


def write_tables(
    tables: Dict[str, pd.DataFrame], out_dir: Path, formats: List[str]
) -> List[Path]:
    """Write named tables as <name>.csv when csv output is requested"""
    if "csv" not in formats:
        return []
    return [write_csv(frame, out_dir / f"{name}.csv") for name, frame in tables.items()]

"""
Experiment drivers behind the `aoinf` subcommands

Each cmd_* function runs one experiment, writes its result files into the configured
output directory and returns a RunResult whose exit_code the CLI passes on.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import ExperimentConfig
from .context import VerificationContext
from .model import ACTIONS, ModelParams, Policy, StateSpace, SystemState
from .policies import (
    BASELINES,
    DecisionRule,
    baseline,
    evaluate_policy_exact,
)
from .results import (
    events_frame,
    load_policy,
    policy_frame,
    sweep_frame,
    trace_frame,
    values_frame,
    write_json,
    write_tables,
)
from .simulation import TrajectoryLog, simulate, summarize
from .solver import SolveConfig, SolveReport, rvi_solve
from .transform import build_smdp_kernel
from .verifier import Verifier

logger = logging.getLogger(__name__)


@dataclass
class RunResult:
    """Outcome of one subcommand"""

    exit_code: int
    files: List[Path] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    text: str = ""


def _output_dir(config: ExperimentConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_tasks(
    fn: Callable[..., Any], tasks: Sequence[Tuple[Any, ...]], workers: int
) -> List[Union[Any, BaseException]]:
    """
    Run fn(*task) for every task, in a process pool when workers > 1

    Results (or the raised exception) come back in submission order, so output does not
    depend on the worker count.
    """
    if workers <= 1 or len(tasks) <= 1:
        results: List[Union[Any, BaseException]] = []
        for task in tasks:
            try:
                results.append(fn(*task))
            except Exception as e:
                results.append(e)
        return results

    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        futures = [pool.submit(fn, *task) for task in tasks]
        results = []
        for future in futures:
            try:
                results.append(future.result())
            except Exception as e:
                results.append(e)
        return results


def _action_counts(policy: Policy) -> Dict[str, int]:
    counts = np.bincount(policy.actions, minlength=len(ACTIONS))
    return {a.label: int(counts[a]) for a in ACTIONS}


def cmd_solve(config: ExperimentConfig) -> RunResult:
    """
    Solve for the optimal policy and write report.json, policy.csv and values.csv

    A run that hits max-iterations still writes its files and exits with status 1.
    """
    out = _output_dir(config)
    report = rvi_solve(config.model, config.solve_config())

    summary = report.summary()
    summary["model"] = config.model.to_dict()
    summary["states"] = report.values.space.size
    summary["policy_action_counts"] = _action_counts(report.policy)

    files = write_tables(
        {"policy": policy_frame(report.policy), "values": values_frame(report.values)},
        out,
        config.output_formats,
    )
    if "json" in config.output_formats:
        files.append(write_json(summary, out / "report.json"))

    return RunResult(0 if report.converged else 1, files, summary)


def resolve_policy(
    config: ExperimentConfig,
    policy_path: Optional[Path] = None,
    baseline_name: Optional[str] = None,
) -> Tuple[Union[Policy, DecisionRule], str, Optional[SolveReport]]:
    """
    Pick the policy an experiment runs

    Returns:
        Tuple of (policy, source label, solve report if a fresh solve was needed)
    """
    if policy_path is not None and baseline_name is not None:
        raise ValueError("--policy and --baseline are mutually exclusive")
    if baseline_name is not None:
        return baseline(baseline_name, StateSpace(config.model)), baseline_name, None
    if policy_path is not None:
        return load_policy(Path(policy_path), config.model), str(policy_path), None

    report = rvi_solve(config.model, config.solve_config())
    if not report.converged:
        logger.warning("Using the policy of a solve that did not converge")
    return report.policy, "optimal", report


def cmd_evaluate(
    config: ExperimentConfig,
    policy_path: Optional[Path] = None,
    baseline_name: Optional[str] = None,
) -> RunResult:
    """Exact long-run evaluation of the optimal, a loaded or a baseline policy"""
    out = _output_dir(config)
    policy, source, report = resolve_policy(config, policy_path, baseline_name)
    result = evaluate_policy_exact(policy, config.model, config.start_state())

    summary: Dict[str, Any] = {"policy": source, "start": list(config.start_state().as_tuple())}
    summary.update(result.summary())
    if report is not None:
        summary["solver_gain_per_slot"] = report.gain_per_slot
        summary["solver_converged"] = report.converged
    summary["model"] = config.model.to_dict()

    files = []
    if "json" in config.output_formats:
        files.append(write_json(summary, out / "evaluation.json"))

    failed = report is not None and not report.converged
    return RunResult(1 if failed else 0, files, summary)


def _simulate_seed(
    policy: Union[Policy, DecisionRule],
    params: ModelParams,
    start: SystemState,
    horizon: int,
    seed: int,
) -> TrajectoryLog:
    logger.info("Simulating seed %d", seed)
    return simulate(policy, params, start, horizon, seed)


def cmd_simulate(
    config: ExperimentConfig,
    policy_path: Optional[Path] = None,
    baseline_name: Optional[str] = None,
    seeds: Optional[Sequence[int]] = None,
) -> RunResult:
    """
    Simulate a policy once per seed

    Writes trace_seed<N>.csv and events_seed<N>.csv per seed and one summary.json holding
    every run's statistics next to the exact long-run average.
    """
    settings = config.simulation
    seeds = list(seeds) if seeds else list(settings.seeds)
    out = _output_dir(config)
    policy, source, report = resolve_policy(config, policy_path, baseline_name)
    start = config.start_state()

    exact = evaluate_policy_exact(policy, config.model, start).average_aoinf_per_slot
    tasks = [(policy, config.model, start, settings.horizon, seed) for seed in seeds]
    logs = run_tasks(_simulate_seed, tasks, config.workers)

    files: List[Path] = []
    runs = []
    for seed, log in zip(seeds, logs):
        if isinstance(log, BaseException):
            raise log
        stats = summarize(log, settings.warmup)
        stats["relative_error"] = abs(stats["time_average_aoinf"] - exact) / exact
        runs.append(stats)
        files.extend(
            write_tables(
                {f"trace_seed{seed}": trace_frame(log), f"events_seed{seed}": events_frame(log)},
                out,
                config.output_formats,
            )
        )

    averages = [run["time_average_aoinf"] for run in runs]
    summary: Dict[str, Any] = {
        "policy": source,
        "start": list(start.as_tuple()),
        "horizon": settings.horizon,
        "warmup": settings.warmup,
        "exact_average_aoinf_per_slot": exact,
        "mean_time_average_aoinf": float(np.mean(averages)),
        "runs": runs,
    }
    if report is not None:
        summary["solver_gain_per_slot"] = report.gain_per_slot
    if "json" in config.output_formats:
        files.append(write_json(summary, out / "summary.json"))

    failed = report is not None and not report.converged
    return RunResult(1 if failed else 0, files, summary)


def sweep_point(
    params: ModelParams, cfg: SolveConfig, start: Optional[Tuple[int, int, int, int]]
) -> Dict[str, Any]:
    """Solve one grid point and evaluate the optimal policy and every baseline exactly"""
    space = StateSpace(params)
    kernel = build_smdp_kernel(space)
    report = rvi_solve(params, cfg, kernel=kernel)
    origin = SystemState.of(*start) if start is not None else None

    row: Dict[str, Any] = {
        "p_tx": params.p_tx,
        "p_offload": params.p_offload,
        "gain_opt": evaluate_policy_exact(
            report.policy, params, origin, kernel=kernel
        ).average_aoinf_per_slot,
    }
    for name in BASELINES:
        row[f"gain_{name}"] = evaluate_policy_exact(
            baseline(name, space), params, origin, kernel=kernel
        ).average_aoinf_per_slot
    row["solver_gain"] = report.gain_per_slot
    row["converged"] = report.converged
    row["iterations"] = report.iterations
    return row


def cmd_sweep(config: ExperimentConfig) -> RunResult:
    """
    Optimal versus baseline gains over the (p_tx, p_offload) grid

    A failing grid point is logged and reported; the remaining points still run.
    """
    points = config.sweep.points
    if not points:
        raise ValueError("sweep grid must not be empty (set sweep.p-tx and sweep.p-offload)")

    out = _output_dir(config)
    cfg = config.solve_config()
    tasks = [
        (config.model.replace(p_tx=p_tx, p_offload=p_offload), cfg, config.start)
        for p_tx, p_offload in points
    ]
    logger.info("Sweeping %d grid points with %d worker(s)", len(tasks), config.workers)
    outcomes = run_tasks(sweep_point, tasks, config.workers)

    rows, failures = [], []
    for (p_tx, p_offload), outcome in zip(points, outcomes):
        if isinstance(outcome, BaseException):
            logger.error("Grid point p_tx=%g, p_offload=%g failed: %s", p_tx, p_offload, outcome)
            failures.append({"p_tx": p_tx, "p_offload": p_offload, "error": str(outcome)})
            continue
        if not outcome["converged"]:
            logger.warning("Grid point p_tx=%g, p_offload=%g did not converge", p_tx, p_offload)
            failures.append(
                {"p_tx": p_tx, "p_offload": p_offload, "error": "solver did not converge"}
            )
        rows.append(outcome)

    summary = {"points": len(points), "rows": rows, "failures": failures}
    files = write_tables({"sweep": sweep_frame(rows)}, out, config.output_formats)
    if "json" in config.output_formats:
        files.append(write_json(summary, out / "sweep.json"))

    return RunResult(1 if failures else 0, files, summary)


def cmd_verify(config: ExperimentConfig, verbose: bool = False) -> RunResult:
    """Run the enabled checks and write verify.json; any ERROR violation fails the run"""
    out = _output_dir(config)
    context = VerificationContext(config)
    verifier = Verifier(context, config)
    violations = verifier.run()

    summary = verifier.report(violations)
    files = []
    if "json" in config.output_formats:
        files.append(write_json(summary, out / "verify.json"))

    errors, _, _ = verifier.get_counts(violations)
    text = verifier.format_results(violations, verbose=verbose)
    return RunResult(1 if errors else 0, files, summary, text)


def cmd_init(path: Path) -> RunResult:
    """Write the default configuration to path unless it exists"""
    if path.exists():
        return RunResult(1, text=f"Config file already exists: {path}")
    ExperimentConfig.default().save(path)
    return RunResult(0, [path], text=f"Created default config: {path}")

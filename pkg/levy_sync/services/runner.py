from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np

from .. import __version__
from ..conf import get_setting
from ..exceptions import LevySyncError
from .csv_io import read_path_csv, write_jump_table, write_path_csv, write_rows_csv, write_sidecar
from .experiment_config import ExperimentConfig
from .integrator import AdditiveSdeSpec, integrate_additive
from .levy_process import SimulationGrid, build_two_sided, sample_levy_path
from .registry import DriftFunction
from .skorohod import skorohod_bounded, skorohod_global
from .stationary import MIN_HORIZON_RATE, langevin_stationary, pullback_stationary, truncation_horizon
from .sync_experiments import REPORT_COLUMNS, SUMMARY_METRICS, run_sync_sweep, summarize

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ("lambda",) + tuple(
    f"{statistic}_{name}" for name in SUMMARY_METRICS for statistic in ("median", "max")
)
# Settings that change numerical output; the manifest records them.
NUMERIC_SETTINGS = (
    "LEVY_SYNC_SKOROHOD_TOL",
    "LEVY_SYNC_SKOROHOD_M_MAX",
    "LEVY_SYNC_SKOROHOD_MAX_REFINEMENT",
    "LEVY_SYNC_DIVERGENCE_GUARD",
    "LEVY_SYNC_PULLBACK_CAUCHY_TOL",
    "LEVY_SYNC_TRUNCATION_FACTOR",
)


@dataclass
class RunResult:
    directory: Path
    files: List[Path] = field(default_factory=list)
    summary: List[Dict[str, float]] = field(default_factory=list)

    def add(self, path: Path) -> Path:
        self.files.append(path)
        return path


def drift_additive(drift: DriftFunction, coefficient, noise, dim: int) -> AdditiveSdeSpec:
    """dY = f(Y) dt + coefficient dL with the linear part of f propagated exactly."""
    linear = -drift.linear * np.eye(dim) if drift.linear else None
    return AdditiveSdeSpec(f=drift.remainder, noise_coeff=coefficient, noise=noise, linear_part=linear, dim=dim)


def _grid(config: ExperimentConfig) -> SimulationGrid:
    return SimulationGrid(config.t_start, config.t_end, config.dt)


def _run_sample(config: ExperimentConfig, result: RunResult) -> None:
    grid = _grid(config)
    triplet = config.noise1.triplet()
    for seed in config.seeds:
        realization = sample_levy_path(triplet, grid, seed)
        stem = result.directory / "paths" / f"noise_seed{seed}"
        result.add(write_path_csv(realization.path, stem.with_suffix(".csv")))
        result.add(write_jump_table(realization.path, stem.parent / f"{stem.name}_jumps.csv"))
        result.add(
            write_sidecar(
                {"seed": seed, "triplet": triplet.describe(), "grid": [grid.t_start, grid.t_end, grid.dt]},
                stem.with_suffix(".json"),
            )
        )


def _run_integrate(config: ExperimentConfig, result: RunResult) -> None:
    grid = _grid(config)
    drift = config.f.build()
    triplet = config.noise1.triplet() if config.noise1 is not None else None
    for seed in config.seeds:
        noise = sample_levy_path(triplet, grid, seed) if triplet is not None else None
        spec = drift_additive(drift, config.alpha, noise, config.dim)
        solution = integrate_additive(spec, grid, np.asarray(config.y0))
        stem = result.directory / "paths" / f"solution_seed{seed}"
        result.add(write_path_csv(solution, stem.with_suffix(".csv")))
        result.add(write_sidecar({"seed": seed, "drift": config.f.label, "y0": list(config.y0)}, stem.with_suffix(".json")))


def _stationary_past(config: ExperimentConfig) -> float:
    if config.rate is not None:
        reach = 2.0 * truncation_horizon(config.rate)
    elif config.horizons is not None:
        reach = max(config.horizons)
    else:
        reach = 40.0 / MIN_HORIZON_RATE
    return max(reach - config.t_start, 0.0) + 1.0


def _run_stationary(config: ExperimentConfig, result: RunResult) -> None:
    grid = _grid(config)
    triplet = config.noise1.triplet()
    T_past = _stationary_past(config)
    T_future = max(config.t_end, config.dt) + config.dt
    for seed in config.seeds:
        noise = build_two_sided(triplet, T_past, T_future, config.dt, seed)
        if config.rate is not None:
            orbit = langevin_stationary(config.rate, config.alpha, noise, grid)
        else:
            spec = drift_additive(config.f.build(), config.alpha, noise, config.dim)
            orbit = pullback_stationary(spec, grid, config.horizons)
        stem = result.directory / "paths" / f"stationary_seed{seed}"
        result.add(write_path_csv(orbit.path, stem.with_suffix(".csv")))
        result.add(write_sidecar({"seed": seed, **orbit.describe()}, stem.with_suffix(".json")))


def _run_metric(config: ExperimentConfig, result: RunResult) -> None:
    x = read_path_csv(config.resolve_path(config.path_a))
    y = read_path_csv(config.resolve_path(config.path_b))
    if config.m is not None:
        metric = skorohod_bounded(x, y, config.m, config.tol)
        row = {"m": config.m, "value": metric.value, "certified_gap": metric.certified_gap}
        result.add(write_rows_csv([row], ("m", "value", "certified_gap"), result.directory / "metric.csv"))
        if config.witness:
            points = [{"t": float(t), "lambda_t": float(s)} for t, s in metric.witness.breakpoints]
            result.add(write_rows_csv(points, ("t", "lambda_t"), result.directory / "witness.csv"))
        return
    metric = skorohod_global(x, y, config.m_max, config.tol)
    row = {"M_max": len(metric.terms), "value": metric.value, "uncertainty": metric.uncertainty}
    result.add(write_rows_csv([row], ("M_max", "value", "uncertainty"), result.directory / "metric.csv"))


def _run_sweep(config: ExperimentConfig, result: RunResult) -> None:
    report = run_sync_sweep(
        config.f.build(),
        config.g.build(),
        config.alpha,
        config.beta,
        config.lambda_values,
        config.window,
        config.seeds,
        config.dt,
        noise1=config.noise1.triplet() if config.noise1 is not None else None,
        noise2=config.noise2.triplet() if config.noise2 is not None else None,
        same_noise=config.same_noise,
        dim=config.dim,
        workers=config.workers,
        m_max=config.m_max,
        tol=config.tol,
    )
    result.add(write_rows_csv(report.as_rows(), REPORT_COLUMNS, result.directory / "report.csv"))
    result.summary = summarize(report)
    result.add(write_rows_csv(result.summary, SUMMARY_COLUMNS, result.directory / "summary.csv"))


HANDLERS: Dict[str, Callable[[ExperimentConfig, RunResult], None]] = {
    "sample": _run_sample,
    "integrate": _run_integrate,
    "stationary": _run_stationary,
    "metric": _run_metric,
    "sweep": _run_sweep,
}


def render_manifest(config: ExperimentConfig, started: datetime, elapsed: float, files: List[Path]) -> str:
    lines = [
        "[run]",
        f"tool_version = {__version__}",
        f"started = {started.isoformat(timespec='seconds')}",
        f"wall_clock_seconds = {elapsed:.3f}",
        f"config = {config.source if config.source is not None else '-'}",
    ]
    for section, values in config.resolved().items():
        lines.append("")
        lines.append(f"[{section}]")
        lines.extend(f"{key} = {value}" for key, value in values.items())
    lines.append("")
    lines.append("[settings]")
    lines.extend(f"{name} = {get_setting(name)!r}" for name in NUMERIC_SETTINGS)
    lines.append("")
    lines.append("[outputs]")
    lines.extend(f"file_{index} = {path.as_posix()}" for index, path in enumerate(files, start=1))
    return "\n".join(lines) + "\n"


def run_experiment(
    config: ExperimentConfig,
    *,
    output_root: Optional[str] = None,
    workers: Optional[int] = None,
) -> RunResult:
    """Run one experiment into <output_root>/<name>/ and write its manifest last."""
    if workers is not None:
        config = replace(config, workers=int(workers))
    directory = Path(output_root or config.output_root) / config.name
    directory.mkdir(parents=True, exist_ok=True)
    result = RunResult(directory=directory)
    started = datetime.now(timezone.utc)
    clock = time.perf_counter()
    logger.info("Running %s experiment %r into %s", config.kind, config.name, directory)
    try:
        HANDLERS[config.kind](config, result)
    except LevySyncError as exc:
        logger.error("Experiment %r (%s) failed: %s", config.name, config.kind, exc)
        raise
    elapsed = time.perf_counter() - clock
    relative = [path.relative_to(directory) for path in result.files]
    manifest = directory / "manifest.txt"
    manifest.write_text(render_manifest(config, started, elapsed, relative), encoding="utf-8")
    result.files.append(manifest)
    logger.info("Experiment %r finished in %.2fs (%d files)", config.name, elapsed, len(result.files))
    return result


__all__ = [
    "HANDLERS",
    "NUMERIC_SETTINGS",
    "RunResult",
    "SUMMARY_COLUMNS",
    "drift_additive",
    "render_manifest",
    "run_experiment",
]

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.linalg import block_diag
from scipy.optimize import root
from scipy.spatial.distance import cdist

from ..conf import get_setting
from ..exceptions import GridMismatchError, NonConvergenceError, NotDissipativeError, ParameterError
from .cadlag_path import CadlagPath
from .integrator import (
    AdditiveSdeSpec,
    NoiseChannel,
    coefficient_matrix,
    estimate_dissipativity,
    integrate_additive,
    integrate_on_nodes,
    jump_adapted_nodes,
)
from .levy_process import GeneratingTriplet, NoiseRealization, SimulationGrid, build_two_sided, derive_seed, noise_path
from .registry import DriftFunction
from .skorohod import GlobalMetric, skorohod_global
from .stationary import (
    MIN_HORIZON_RATE,
    StationaryOrbit,
    langevin_stationary,
    pullback_stationary,
    sup_difference,
    truncation_horizon,
)

logger = logging.getLogger(__name__)

Drift = Callable[[np.ndarray], np.ndarray]
NoiseLike = Union[CadlagPath, NoiseRealization]

DISSIPATIVITY_RADIUS = 10.0
DISSIPATIVITY_SAMPLES = 4000


def _split_drift(f: Drift) -> Tuple[float, Drift]:
    """(a, r) with f(y) = -a y + r(y); plain callables have a = 0."""
    if isinstance(f, DriftFunction):
        return f.linear, f.remainder
    return 0.0, f


def _apply_rows(f: Drift, values: np.ndarray) -> np.ndarray:
    if isinstance(f, DriftFunction):
        return f(values)
    return np.vstack([np.asarray(f(row), dtype=float).reshape(values.shape[1]) for row in values])


@dataclass(frozen=True, eq=False)
class CoupledSpec:
    """
    dX = f(X) dt + coupling (Y - X) dt + alpha dL1
    dY = g(Y) dt + coupling (X - Y) dt + beta dL2
    """

    f: Drift
    g: Drift
    alpha: object = 1.0
    beta: object = 1.0
    coupling: float = 0.0
    noise1: Optional[NoiseLike] = None
    noise2: Optional[NoiseLike] = None
    dim: int = 1

    def __post_init__(self) -> None:
        if not self.coupling >= 0:
            raise ParameterError(f"Field 'lambda' must be non-negative; got {self.coupling}.")
        if (
            isinstance(self.noise1, NoiseRealization)
            and isinstance(self.noise2, NoiseRealization)
            and self.noise1.seed == self.noise2.seed
        ):
            logger.warning("L1 and L2 share seed %d; the two noises are not independent", self.noise1.seed)

    def with_coupling(self, coupling: float) -> "CoupledSpec":
        return replace(self, coupling=float(coupling))

    def _channels(self, first, second, scale: float = 1.0) -> Tuple[NoiseChannel, ...]:
        d = self.dim
        channels = []
        if self.noise1 is not None:
            path = noise_path(self.noise1)
            block = coefficient_matrix(self.alpha, d, path.dim) * scale
            channels.append(NoiseChannel(first(block), path))
        if self.noise2 is not None:
            path = noise_path(self.noise2)
            block = coefficient_matrix(self.beta, d, path.dim) * scale
            channels.append(NoiseChannel(second(block), path))
        return tuple(channels)

    def as_additive(self) -> AdditiveSdeSpec:
        """Stacked state (X, Y); the coupling and the linear drift parts form M."""
        d = self.dim
        eye = np.eye(d)
        a_f, rest_f = _split_drift(self.f)
        a_g, rest_g = _split_drift(self.g)
        M = self.coupling * np.block([[-eye, eye], [eye, -eye]]) + block_diag(-a_f * eye, -a_g * eye)

        def stacked(y: np.ndarray) -> np.ndarray:
            return np.concatenate(
                [
                    np.asarray(rest_f(y[:d]), dtype=float).reshape(d),
                    np.asarray(rest_g(y[d:]), dtype=float).reshape(d),
                ]
            )

        channels = self._channels(
            lambda block: np.vstack([block, np.zeros_like(block)]),
            lambda block: np.vstack([np.zeros_like(block), block]),
        )
        return AdditiveSdeSpec(f=stacked, linear_part=M, dim=2 * d, extra_channels=channels)


def averaged_spec(spec: CoupledSpec) -> AdditiveSdeSpec:
    """dZ = (f(Z) + g(Z)) / 2 dt + alpha / 2 dL1 + beta / 2 dL2."""
    d = spec.dim
    a_f, rest_f = _split_drift(spec.f)
    a_g, rest_g = _split_drift(spec.g)
    a = 0.5 * (a_f + a_g)

    def averaged(z: np.ndarray) -> np.ndarray:
        return 0.5 * (
            np.asarray(rest_f(z), dtype=float).reshape(d) + np.asarray(rest_g(z), dtype=float).reshape(d)
        )

    channels = spec._channels(lambda block: block, lambda block: block, scale=0.5)
    return AdditiveSdeSpec(
        f=averaged,
        linear_part=-a * np.eye(d) if a else None,
        dim=d,
        extra_channels=channels,
    )


def _split_orbit(orbit: StationaryOrbit, d: int, rate: float) -> Tuple[StationaryOrbit, StationaryOrbit]:
    path = orbit.path
    halves = []
    for columns in (slice(0, d), slice(d, 2 * d)):
        component = CadlagPath(path.times, path.values[:, columns], path.left_values[:, columns])
        halves.append(replace(orbit, path=component, rate=float(rate)))
    return halves[0], halves[1]


def coupled_stationary_pair(
    spec: CoupledSpec,
    grid: SimulationGrid,
    horizons: Optional[Sequence[float]] = None,
) -> Tuple[StationaryOrbit, StationaryOrbit]:
    orbit = pullback_stationary(spec, grid, horizons)
    logger.debug("Coupled pullback at lambda=%g converged (difference %.3g)", spec.coupling, orbit.truncation_bound)
    return _split_orbit(orbit, spec.dim, spec.coupling)


def sync_gap(orbit_pair: Tuple[StationaryOrbit, StationaryOrbit], window: Optional[Tuple[float, float]] = None) -> float:
    """sup over the window, right values and left limits, of |X - Y|."""
    x, y = (orbit.path for orbit in orbit_pair)
    if not np.array_equal(x.times, y.times):
        raise GridMismatchError("Orbits must share a grid to compute the synchronization gap.")
    if window is not None:
        x, y = x.restrict(*window), y.restrict(*window)
    return sup_difference(x, y)


def contraction_check(spec: CoupledSpec, y0_a, y0_b, grid: SimulationGrid, l: float) -> float:
    """max over t of |dZ_t|^2 e^{2 l (t - t0)} / |dZ_0|^2 for two starts under the same noise."""
    start_a = np.atleast_1d(np.asarray(y0_a, dtype=float))
    start_b = np.atleast_1d(np.asarray(y0_b, dtype=float))
    initial = float(np.sum((start_a - start_b) ** 2))
    if initial == 0.0:
        raise ParameterError("Fields 'y0_a' and 'y0_b' must differ; the contraction ratio is undefined.")
    additive = spec.as_additive()
    first = integrate_additive(additive, grid, start_a)
    second = integrate_additive(additive, grid, start_b)
    growth = np.exp(2.0 * l * (first.times - first.times[0]))
    right = np.sum((first.values - second.values) ** 2, axis=1) * growth
    left = np.sum((first.left_values - second.left_values) ** 2, axis=1) * growth
    return float(max(right.max(), left.max()) / initial)


def dissipativity_constant(f: Drift, g: Drift, dim: int = 1, seed: int = 0) -> float:
    """min of the sampled one-sided Lipschitz constants of f and g."""
    estimates = [
        estimate_dissipativity(h, DISSIPATIVITY_RADIUS, DISSIPATIVITY_SAMPLES, seed, dim=dim) for h in (f, g)
    ]
    return min(estimate.l_hat for estimate in estimates)


def absorption_integrals(spec: CoupledSpec, t: float, dt: float, l: float) -> Tuple[float, float]:
    """
    The f- and g-terms of int_{-inf}^t e^{l (s - t) / 2} [...] ds evaluated on
    the rate-lambda Langevin orbits driven by L1 and L2.
    """
    rate = spec.coupling
    if not rate > 0:
        raise ParameterError(f"Absorption radius needs lambda > 0; got {rate}.")
    if not l > 0:
        raise NotDissipativeError(f"Absorption radius needs l > 0; got {l}.")
    horizon = float(get_setting("LEVY_SYNC_TRUNCATION_FACTOR")) / l
    grid = SimulationGrid(t - horizon, t, dt)
    d = spec.dim
    orbits = []
    for noise, coefficient in ((spec.noise1, spec.alpha), (spec.noise2, spec.beta)):
        if noise is None:
            orbits.append(None)
        else:
            orbits.append(langevin_stationary(rate, coefficient, noise, grid).path)
    times = grid.nodes()
    for orbit in orbits:
        if orbit is not None:
            times = np.union1d(times, orbit.times)
    x_bar, y_bar = (
        np.zeros((times.size, d)) if orbit is None else orbit.eval_many(times).reshape(times.size, d)
        for orbit in orbits
    )
    weights = np.exp(0.5 * l * (times - t))
    f_term = np.sum((_apply_rows(spec.f, x_bar) + rate * y_bar) ** 2, axis=1)
    g_term = np.sum((_apply_rows(spec.g, y_bar) + rate * x_bar) ** 2, axis=1)
    return float(trapezoid(weights * f_term, times)), float(trapezoid(weights * g_term, times))


def absorption_radius(spec: CoupledSpec, t: float, dt: float, l: Optional[float] = None) -> float:
    """R with R^2 = 1 + (4 / l) int_{-inf}^t e^{l (s - t) / 2} [...] ds."""
    if l is None:
        l = dissipativity_constant(spec.f, spec.g, spec.dim)
    f_term, g_term = absorption_integrals(spec, t, dt, l)
    return math.sqrt(1.0 + 4.0 / l * (f_term + g_term))


def _points(values) -> np.ndarray:
    array = np.asarray(values, dtype=float)
    if array.ndim <= 1:
        array = array.reshape(-1, 1)
    return array


def hausdorff_semidistance(A, B) -> float:
    """max over a in A of min over b in B of |a - b|."""
    a, b = _points(A), _points(B)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ParameterError("Hausdorff semi-distance needs two non-empty point sets.")
    return float(cdist(a, b).min(axis=1).max())


def pullback_attraction(
    system,
    grid: SimulationGrid,
    initial_points,
    horizons: Sequence[float],
    *,
    t: Optional[float] = None,
) -> List[Tuple[float, float]]:
    """Semi-distance from the ensemble pushed from t - h to t onto the stationary point at t."""
    spec = system if isinstance(system, AdditiveSdeSpec) else system.as_additive()
    orbit = pullback_stationary(spec, grid)
    t = grid.t_start if t is None else float(t)
    target = orbit.path.eval(t)[None, :]
    starts = _points(initial_points)
    paths = [channel.noise for channel in spec.channels]
    table = []
    for horizon in horizons:
        cells = grid.cells_for(horizon)
        nodes = jump_adapted_nodes(SimulationGrid(t - cells * grid.dt, t, grid.dt).nodes(), paths)
        ends = np.vstack([integrate_on_nodes(spec, nodes, start).values[-1] for start in starts])
        table.append((float(horizon), hausdorff_semidistance(ends, target)))
    return table


class Equilibria(NamedTuple):
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray


def deterministic_equilibria(f: Drift, g: Drift, coupling: float, dim: int = 1, guess=None) -> Equilibria:
    """Rest points of the noiseless coupled system and of its average."""
    d = dim

    def coupled(v: np.ndarray) -> np.ndarray:
        x, y = v[:d], v[d:]
        return np.concatenate(
            [
                np.asarray(f(x), dtype=float).reshape(d) + coupling * (y - x),
                np.asarray(g(y), dtype=float).reshape(d) + coupling * (x - y),
            ]
        )

    def average(z: np.ndarray) -> np.ndarray:
        return 0.5 * (np.asarray(f(z), dtype=float).reshape(d) + np.asarray(g(z), dtype=float).reshape(d))

    start = np.zeros(2 * d) if guess is None else np.asarray(guess, dtype=float)
    pair = root(coupled, start, tol=1e-13)
    mean = root(average, start[:d], tol=1e-13)
    if not (pair.success and mean.success):
        raise NonConvergenceError(f"Equilibrium search failed: {pair.message if not pair.success else mean.message}")
    return Equilibria(x=pair.x[:d], y=pair.x[d:], z=mean.x)


@dataclass(frozen=True)
class SweepRow:
    seed: int
    lambda_value: float
    gap: float
    skorohod_x: float
    skorohod_y: float
    contraction_margin: float
    absorption_radius: float


REPORT_COLUMNS = ("seed", "lambda", "gap", "skorohod_x", "skorohod_y", "contraction_margin", "absorption_radius")


@dataclass(frozen=True)
class SyncReport:
    lambda_values: Tuple[float, ...]
    seeds: Tuple[int, ...]
    rows: Tuple[SweepRow, ...] = field(default_factory=tuple)

    def column(self, name: str) -> Dict[float, List[float]]:
        table: Dict[float, List[float]] = {value: [] for value in self.lambda_values}
        for row in self.rows:
            table[row.lambda_value].append(getattr(row, name))
        return table

    @property
    def gap(self) -> Dict[float, List[float]]:
        return self.column("gap")

    @property
    def skorohod_to_avg(self) -> Dict[float, List[Tuple[float, float]]]:
        xs, ys = self.column("skorohod_x"), self.column("skorohod_y")
        return {value: list(zip(xs[value], ys[value])) for value in self.lambda_values}

    @property
    def contraction_margin(self) -> Dict[float, List[float]]:
        return self.column("contraction_margin")

    @property
    def absorption_radius(self) -> Dict[float, List[float]]:
        return self.column("absorption_radius")

    def as_rows(self) -> List[Dict[str, float]]:
        return [
            {
                "seed": row.seed,
                "lambda": row.lambda_value,
                "gap": row.gap,
                "skorohod_x": row.skorohod_x,
                "skorohod_y": row.skorohod_y,
                "contraction_margin": row.contraction_margin,
                "absorption_radius": row.absorption_radius,
            }
            for row in self.rows
        ]


SUMMARY_METRICS = ("gap", "skorohod_x", "skorohod_y", "contraction_margin", "absorption_radius")


def summarize(report: SyncReport) -> List[Dict[str, float]]:
    """Per-lambda median and max of every metric."""
    summary = []
    for value in report.lambda_values:
        entry: Dict[str, float] = {"lambda": value}
        for name in SUMMARY_METRICS:
            samples = np.asarray(report.column(name)[value], dtype=float)
            entry[f"median_{name}"] = float(np.median(samples))
            entry[f"max_{name}"] = float(np.max(samples))
        summary.append(entry)
    return summary


def _extend_constant(path: CadlagPath, start: float, end: float) -> CadlagPath:
    times, values, left = path.times, path.values, path.left_values
    if start < path.t_start:
        times = np.concatenate([[start], times])
        values = np.vstack([values[:1], values])
        left = np.vstack([values[:1], left])
    if end > path.t_end:
        times = np.concatenate([times, [end]])
        values = np.vstack([values, values[-1:]])
        left = np.vstack([left, values[-1:]])
    return CadlagPath(times, values, left)


def window_metric(
    x: CadlagPath,
    z: CadlagPath,
    window: Tuple[float, float],
    m_max: Optional[int] = None,
    tol: Optional[float] = None,
) -> GlobalMetric:
    """
    Global Skorohod metric after mapping the window onto [-m, m] by a translation.

    Both paths are held constant outside the window, so every level up to
    ``m_max`` (LEVY_SYNC_SKOROHOD_M_MAX by default) sees the whole window.
    """
    T1, T2 = window
    m = 0.5 * (T2 - T1)
    offset = -(T1 + m)
    levels = int(get_setting("LEVY_SYNC_SKOROHOD_M_MAX")) if m_max is None else int(m_max)
    reach = max(levels, m)
    paths = [_extend_constant(path.restrict(T1, T2).retime(offset), -reach, reach) for path in (x, z)]
    return skorohod_global(paths[0], paths[1], levels, tol)


def window_skorohod(
    x: CadlagPath,
    z: CadlagPath,
    window: Tuple[float, float],
    m_max: Optional[int] = None,
    tol: Optional[float] = None,
) -> float:
    return window_metric(x, z, window, m_max, tol).value


def _validate_sweep(lambda_list: Sequence[float], window: Tuple[float, float], seeds: Sequence[int], dt: float) -> None:
    values = [float(v) for v in lambda_list]
    if not values:
        raise ParameterError("Field 'lambda_values' must not be empty.")
    if any(v <= 0 for v in values):
        raise ParameterError("Field 'lambda_values' must be positive; the absorption radius needs lambda > 0.")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ParameterError("Field 'lambda_values' must be ascending.")
    if not window[1] > window[0]:
        raise ParameterError(f"Field 'window' must satisfy T1 < T2; got {window}.")
    if not seeds:
        raise ParameterError("Field 'seeds' must not be empty.")
    if not dt > 0:
        raise ParameterError(f"Field 'dt' must be positive; got {dt}.")


def _realize(triplet: Optional[GeneratingTriplet], T_past: float, T_future: float, dt: float, seed: int):
    if triplet is None:
        return None
    return build_two_sided(triplet, T_past, T_future, dt, seed)


def run_sync_sweep(
    f: Drift,
    g: Drift,
    alpha,
    beta,
    lambda_list: Sequence[float],
    window: Tuple[float, float],
    seeds: Sequence[int],
    dt: float,
    *,
    noise1: Optional[GeneratingTriplet] = None,
    noise2: Optional[GeneratingTriplet] = None,
    same_noise: bool = False,
    dim: int = 1,
    workers: Optional[int] = None,
    m_max: Optional[int] = None,
    tol: Optional[float] = None,
) -> SyncReport:
    """
    Synchronization sweep over seeds x lambda.

    Each seed realizes L1 and L2 once; every lambda and the averaged orbit
    reuse those paths. Rows come back ordered by (seed, lambda) whatever
    the worker count.
    """
    _validate_sweep(lambda_list, window, seeds, dt)
    lambdas = tuple(float(v) for v in lambda_list)
    T1, T2 = float(window[0]), float(window[1])
    grid = SimulationGrid(T1, T2, dt)

    l = dissipativity_constant(f, g, dim)
    if l <= 0:
        raise NotDissipativeError(f"Drifts are not dissipative (l_hat={l:.4g}).")
    rate = max(l, MIN_HORIZON_RATE)
    horizons = (20.0 / rate, 40.0 / rate)
    factor = float(get_setting("LEVY_SYNC_TRUNCATION_FACTOR"))
    need = max(horizons[-1], factor / l + truncation_horizon(lambdas[0])) + 1.0
    T_past = max(need - T1, 1.0)
    T_future = max(T2, 1.0) + dt

    bases: Dict[int, CoupledSpec] = {}
    for seed in seeds:
        first = _realize(noise1, T_past, T_future, dt, derive_seed(seed, 1))
        second = first if same_noise else _realize(noise2, T_past, T_future, dt, derive_seed(seed, 2))
        bases[seed] = CoupledSpec(f, g, alpha, beta, 0.0, first, second, dim)

    def averaged_orbit(seed: int) -> StationaryOrbit:
        return pullback_stationary(averaged_spec(bases[seed]), grid, horizons)

    def cell(seed: int, value: float, average: StationaryOrbit) -> SweepRow:
        spec = bases[seed].with_coupling(value)
        orbit_x, orbit_y = coupled_stationary_pair(spec, grid, horizons)
        y0_b = np.concatenate([np.ones(dim), -np.ones(dim)])
        row = SweepRow(
            seed=int(seed),
            lambda_value=value,
            gap=sync_gap((orbit_x, orbit_y)),
            skorohod_x=window_skorohod(orbit_x.path, average.path, (T1, T2), m_max, tol),
            skorohod_y=window_skorohod(orbit_y.path, average.path, (T1, T2), m_max, tol),
            contraction_margin=contraction_check(spec, np.zeros(2 * dim), y0_b, grid, l),
            absorption_radius=absorption_radius(spec, T1, dt, l),
        )
        logger.info("Sweep cell seed=%s lambda=%g gap=%.4g", seed, value, row.gap)
        return row

    workers = int(get_setting("LEVY_SYNC_WORKERS")) if workers is None else int(workers)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            averages = dict(zip(seeds, pool.map(averaged_orbit, seeds)))
            jobs = [(seed, value) for seed in seeds for value in lambdas]
            rows = list(pool.map(lambda job: cell(job[0], job[1], averages[job[0]]), jobs))
    else:
        averages = {seed: averaged_orbit(seed) for seed in seeds}
        rows = [cell(seed, value, averages[seed]) for seed in seeds for value in lambdas]

    report = SyncReport(lambda_values=lambdas, seeds=tuple(int(s) for s in seeds), rows=tuple(rows))
    for seed in seeds:
        gaps = [row.gap for row in rows if row.seed == seed]
        if any(b > a for a, b in zip(gaps, gaps[1:])):
            logger.warning("Gap is not monotone in lambda for seed %s: %s", seed, gaps)
    return report


__all__ = [
    "CoupledSpec",
    "Equilibria",
    "REPORT_COLUMNS",
    "SUMMARY_METRICS",
    "SweepRow",
    "SyncReport",
    "absorption_integrals",
    "absorption_radius",
    "averaged_spec",
    "contraction_check",
    "coupled_stationary_pair",
    "deterministic_equilibria",
    "dissipativity_constant",
    "hausdorff_semidistance",
    "pullback_attraction",
    "run_sync_sweep",
    "summarize",
    "sync_gap",
    "window_metric",
    "window_skorohod",
]

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from ..conf import get_setting
from ..exceptions import DomainError, NonConvergenceError, NotDissipativeError, ParameterError
from .cadlag_path import CadlagPath
from .integrator import AdditiveSdeSpec, estimate_dissipativity, integrate_on_nodes, jump_adapted_nodes
from .levy_process import (
    AlphaStable,
    CompoundPoisson,
    GeneratingTriplet,
    NoiseRealization,
    SimulationGrid,
    noise_path,
)

logger = logging.getLogger(__name__)

NoiseLike = Union[CadlagPath, NoiseRealization]

# Dissipativity precheck used by the pullback solver.
PRECHECK_RADIUS = 10.0
PRECHECK_SAMPLES = 2000
# Default horizons assume at least this contraction rate.
MIN_HORIZON_RATE = 0.5
# Sigma multiple used by the convolution tail estimate.
TAIL_SIGMAS = 5.0


@dataclass(frozen=True, eq=False)
class StationaryOrbit:
    path: CadlagPath
    rate: float
    pullback_horizon: float
    truncation_bound: float
    horizon_differences: Tuple[float, ...] = ()

    def describe(self) -> dict:
        return {
            "lambda": self.rate,
            "pullback_horizon": self.pullback_horizon,
            "truncation_bound": self.truncation_bound,
            "horizon_differences": list(self.horizon_differences),
            "t_start": self.path.t_start,
            "t_end": self.path.t_end,
            "knots": int(self.path.times.size),
        }


class Convolution(NamedTuple):
    value: np.ndarray
    tail_bound: float


def truncation_horizon(rate: float) -> float:
    factor = float(get_setting("LEVY_SYNC_TRUNCATION_FACTOR"))
    return max(factor / rate, factor)


def convolution_tail_bound(rate: float, triplet: GeneratingTriplet, T_trunc: float) -> float:
    """
    Estimate of |int_{-inf}^{t - T_trunc} e^{-rate (t - s)} dL_s|.

    The neglected piece equals e^{-rate T_trunc} times a stationary OU value;
    that value is bounded by its mean plus a few standard deviations.
    """
    scale = float(np.linalg.norm(triplet.gamma)) / rate
    scale += TAIL_SIGMAS * np.sqrt(float(np.trace(triplet.A)) / (2.0 * rate))
    measure = triplet.jump_measure
    if isinstance(measure, CompoundPoisson):
        scale += TAIL_SIGMAS * measure.rate * measure.distribution.mean_abs() / rate
    elif isinstance(measure, AlphaStable):
        scale += TAIL_SIGMAS * measure.scale * (measure.alpha * rate) ** (-1.0 / measure.alpha)
    return float(np.exp(-rate * T_trunc) * scale)


def _empirical_tail_bound(rate: float, path: CadlagPath, start: float, end: float, T_trunc: float) -> float:
    return float(np.exp(-rate * T_trunc) * 2.0 * path.sup_norm(start, end))


def ou_convolution(rate: float, noise: NoiseLike, t: float, T_trunc: float) -> Convolution:
    """
    int_{t - T_trunc}^{t} e^{-rate (t - s)} dL_s by integration by parts:

        L(t) - e^{-rate T} L(t - T) - rate * int e^{-rate (t - s)} L(s) ds,

    with the Riemann part integrated in closed form on every affine segment.
    """
    if not rate > 0:
        raise ParameterError(f"Rate must be positive; got {rate}.")
    if not T_trunc > 0:
        raise ParameterError(f"T_trunc must be positive; got {T_trunc}.")
    path = noise_path(noise)
    start = t - T_trunc
    if not path.covers(start, t):
        raise DomainError(
            f"Noise on [{path.t_start}, {path.t_end}] lacks the past window [{start}, {t}] "
            f"needed for T_trunc={T_trunc}."
        )
    window = path.restrict(max(start, path.t_start), min(t, path.t_end))
    times, right, left = window.times, window.values, window.left_values
    weights = np.exp(-rate * (t - times))
    lengths = np.diff(times)
    phi = -np.expm1(-rate * lengths) / (rate * lengths)
    riemann = right[:-1] * (weights[1:] - weights[:-1])[:, None]
    riemann += (left[1:] - right[:-1]) * (weights[1:] * (1.0 - phi))[:, None]
    value = right[-1] - weights[0] * right[0] - riemann.sum(axis=0)

    if isinstance(noise, NoiseRealization):
        bound = convolution_tail_bound(rate, noise.triplet, T_trunc)
    else:
        bound = _empirical_tail_bound(rate, path, window.t_start, window.t_end, T_trunc)
    return Convolution(value=value, tail_bound=bound)


def _ou_recursion(rate: float, path: CadlagPath, nodes: np.ndarray, x0) -> Tuple[np.ndarray, np.ndarray]:
    """Exact OU update between nodes for noise that is affine between them."""
    at = path.eval_many(nodes)
    before = path.left_limit_many(nodes[1:])
    lengths = np.diff(nodes)
    decay = np.exp(-rate * lengths)
    phi = -np.expm1(-rate * lengths) / (rate * lengths)
    n, d = at.shape
    values = np.empty((n, d))
    left = np.empty((n, d))
    values[0] = left[0] = x0
    for k in range(n - 1):
        left[k + 1] = decay[k] * values[k] + phi[k] * (before[k] - at[k])
        values[k + 1] = left[k + 1] + (at[k + 1] - before[k])
    return values, left


def _check_truncation(rate: float, noise: NoiseLike, t: float, T_trunc: float, value: np.ndarray) -> None:
    path = noise_path(noise)
    if not path.covers(t - 2.0 * T_trunc, t):
        logger.debug("Skipping truncation doubling check: noise does not reach %g", t - 2.0 * T_trunc)
        return
    doubled = ou_convolution(rate, noise, t, 2.0 * T_trunc).value
    gap = float(np.max(np.abs(doubled - value)))
    if gap > 1e-6 * max(1.0, float(np.max(np.abs(value)))):
        raise NonConvergenceError(
            f"Truncated convolution at rate {rate} changed by {gap:.3g} when T_trunc doubled to {2.0 * T_trunc}."
        )


def _orbit_nodes(grid: SimulationGrid, paths: Sequence[CadlagPath]) -> np.ndarray:
    return jump_adapted_nodes(grid.nodes(), paths)


def _langevin_on_nodes(rate: float, noise: NoiseLike, nodes: np.ndarray, T_trunc: float) -> Tuple[CadlagPath, float]:
    start = ou_convolution(rate, noise, float(nodes[0]), T_trunc)
    _check_truncation(rate, noise, float(nodes[0]), T_trunc, start.value)
    values, left = _ou_recursion(rate, noise_path(noise), nodes, start.value)
    return CadlagPath(nodes, values, left), start.tail_bound


def langevin_stationary(
    rate: float,
    alpha,
    noise: NoiseLike,
    grid: SimulationGrid,
    *,
    T_trunc: Optional[float] = None,
) -> StationaryOrbit:
    """Stationary solution of dX = -rate X dt + alpha dL on the grid window."""
    if not rate > 0:
        raise ParameterError(f"lambda must be positive; got {rate}.")
    horizon = truncation_horizon(rate) if T_trunc is None else float(T_trunc)
    nodes = _orbit_nodes(grid, [noise_path(noise)])
    path, bound = _langevin_on_nodes(rate, noise, nodes, horizon)
    coefficient = np.asarray(alpha, dtype=float)
    orbit = CadlagPath(path.times, path.values * coefficient, path.left_values * coefficient)
    return StationaryOrbit(
        path=orbit,
        rate=float(rate),
        pullback_horizon=horizon,
        truncation_bound=float(np.max(np.abs(coefficient))) * bound,
    )


def ou_window_sup(noise: NoiseLike, lambda_list: Sequence[float], T1: float, T2: float) -> List[Tuple[float, float]]:
    """sup over [T1, T2] of |int_{T1}^t e^{-lambda (t - s)} dL_s| for each lambda."""
    if not T2 > T1:
        raise ParameterError(f"Need T2 > T1; got [{T1}, {T2}].")
    path = noise_path(noise)
    if not path.covers(T1, T2):
        raise DomainError(f"Noise on [{path.t_start}, {path.t_end}] does not cover [{T1}, {T2}].")
    window = path.restrict(T1, T2)
    table = []
    for rate in lambda_list:
        if not rate > 0:
            raise ParameterError(f"lambda must be positive; got {rate}.")
        values, left = _ou_recursion(float(rate), window, window.times, np.zeros(path.dim))
        sup = max(float(np.linalg.norm(values, axis=1).max()), float(np.linalg.norm(left, axis=1).max()))
        table.append((float(rate), sup))
    return table


# Published name of the window-sup table.
lemma1_iii_check = ou_window_sup


def sup_difference(first: CadlagPath, second: CadlagPath) -> float:
    """Sup distance over the union of both knot sets, right values and left limits."""
    start = max(first.t_start, second.t_start)
    end = min(first.t_end, second.t_end)
    times = np.union1d(first.times, second.times)
    times = times[(times >= start) & (times <= end)]
    gap = float(np.linalg.norm(first.eval_many(times) - second.eval_many(times), axis=1).max())
    inner = times[times > start]
    if inner.size:
        lefts = first.left_limit_many(inner) - second.left_limit_many(inner)
        gap = max(gap, float(np.linalg.norm(lefts, axis=1).max()))
    return gap


def _as_additive(system) -> AdditiveSdeSpec:
    if isinstance(system, AdditiveSdeSpec):
        return system
    return system.as_additive()


def pullback_stationary(
    system,
    grid: SimulationGrid,
    horizons: Optional[Sequence[float]] = None,
    *,
    y0=None,
    precheck_seed: int = 0,
) -> StationaryOrbit:
    """
    Stationary orbit as a pullback limit.

    Each horizon h starts the flow from ``y0`` at grid.t_start - h; the orbit
    is the longest-horizon run restricted to the grid window. The last two
    runs must agree to the Cauchy tolerance plus dt.
    """
    spec = _as_additive(system)
    estimate = estimate_dissipativity(
        spec.drift_at, PRECHECK_RADIUS, PRECHECK_SAMPLES, precheck_seed, dim=spec.dim
    )
    if estimate.violated:
        raise NotDissipativeError(
            f"Drift is not dissipative on the radius-{PRECHECK_RADIUS:g} ball (l_hat={estimate.l_hat:.4g})."
        )
    if horizons is None:
        rate = max(estimate.l_hat, MIN_HORIZON_RATE)
        horizons = (20.0 / rate, 40.0 / rate)
    horizons = [float(h) for h in horizons]
    if not horizons or any(h <= 0 for h in horizons) or any(b <= a for a, b in zip(horizons, horizons[1:])):
        raise ParameterError(f"Field 'horizons' must be positive and increasing; got {horizons}.")

    start = np.zeros(spec.dim) if y0 is None else np.atleast_1d(np.asarray(y0, dtype=float))
    paths = [channel.noise for channel in spec.channels]
    runs: List[CadlagPath] = []
    used: List[float] = []
    for horizon in horizons:
        cells = grid.cells_for(horizon)
        nodes = jump_adapted_nodes(grid.nodes(past_cells=cells), paths)
        trajectory = integrate_on_nodes(spec, nodes, start)
        runs.append(trajectory.restrict(grid.t_start, grid.t_end))
        used.append(cells * grid.dt)
        logger.debug("Pullback run from t=%g finished (%d nodes)", grid.t_start - used[-1], nodes.size)

    differences = tuple(sup_difference(a, b) for a, b in zip(runs[:-1], runs[1:]))
    tolerance = float(get_setting("LEVY_SYNC_PULLBACK_CAUCHY_TOL")) + grid.dt
    if differences and differences[-1] > tolerance:
        raise NonConvergenceError(
            f"Pullback runs from horizons {used[-2]:g} and {used[-1]:g} differ by {differences[-1]:.3g} "
            f"(tolerance {tolerance:.3g})."
        )
    if len(differences) > 1 and differences[-1] > differences[0]:
        logger.warning("Pullback differences did not decrease across horizons: %s", differences)
    return StationaryOrbit(
        path=runs[-1],
        rate=estimate.l_hat,
        pullback_horizon=used[-1],
        truncation_bound=differences[-1] if differences else float("nan"),
        horizon_differences=differences,
    )


def recenter_example_noise(noise1: NoiseLike, noise2: NoiseLike) -> Tuple[NoiseLike, NoiseLike]:
    """
    Map (L1, L2) to (L3, L4) with dL3 = dL1 - dt and dL4 = dL2 - 1.5 dt.

    This absorbs the constant forcing of the drifts -(x + 1) and -(y + 3) into
    the noise so that the coupled example becomes linear.
    """
    return _with_drift(noise1, -1.0), _with_drift(noise2, -1.5)


def _with_drift(noise: NoiseLike, rate: float) -> NoiseLike:
    if not isinstance(noise, NoiseRealization):
        return noise.add_drift(rate)
    triplet = noise.triplet
    shifted = GeneratingTriplet(triplet.gamma + rate, triplet.A, triplet.jump_measure)
    return NoiseRealization(path=noise.path.add_drift(rate), seed=noise.seed, grid=noise.grid, triplet=shifted)


def example_closed_form(
    rate: float,
    noise3: NoiseLike,
    noise4: NoiseLike,
    grid: SimulationGrid,
    *,
    T_trunc: Optional[float] = None,
) -> Tuple[StationaryOrbit, StationaryOrbit]:
    """
    Stationary pair of the linear coupled example driven by (L3, 2 L4).

    With C_r(L) the rate-r OU convolution,

        X = (C_1(L3) + C_q(L3)) / 2 + C_1(L4) - C_q(L4)
        Y = (C_1(L3) - C_q(L3)) / 2 + C_1(L4) + C_q(L4)

    where q = 2 * rate + 1.
    """
    if not rate > 0:
        raise ParameterError(f"lambda must be positive; got {rate}.")
    fast = 2.0 * rate + 1.0
    nodes = _orbit_nodes(grid, [noise_path(noise3), noise_path(noise4)])
    horizon = truncation_horizon(1.0) if T_trunc is None else float(T_trunc)
    slow3, bound_slow3 = _langevin_on_nodes(1.0, noise3, nodes, horizon)
    fast3, bound_fast3 = _langevin_on_nodes(fast, noise3, nodes, horizon)
    slow4, bound_slow4 = _langevin_on_nodes(1.0, noise4, nodes, horizon)
    fast4, bound_fast4 = _langevin_on_nodes(fast, noise4, nodes, horizon)

    x_path = slow3.combine(fast3, 0.5, 0.5).combine(slow4.combine(fast4, 1.0, -1.0))
    y_path = slow3.combine(fast3, 0.5, -0.5).combine(slow4.combine(fast4, 1.0, 1.0))
    bound = 0.5 * (bound_slow3 + bound_fast3) + bound_slow4 + bound_fast4
    return (
        StationaryOrbit(path=x_path, rate=float(rate), pullback_horizon=horizon, truncation_bound=bound),
        StationaryOrbit(path=y_path, rate=float(rate), pullback_horizon=horizon, truncation_bound=bound),
    )


__all__ = [
    "Convolution",
    "StationaryOrbit",
    "convolution_tail_bound",
    "example_closed_form",
    "langevin_stationary",
    "lemma1_iii_check",
    "ou_convolution",
    "ou_window_sup",
    "pullback_stationary",
    "recenter_example_noise",
    "sup_difference",
    "truncation_horizon",
]

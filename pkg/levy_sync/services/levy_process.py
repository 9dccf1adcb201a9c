from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple, Union

import numpy as np

from ..exceptions import DomainError, GridError, ParameterError
from .cadlag_path import CadlagPath

logger = logging.getLogger(__name__)

# Substream keys: one counter-based Philox stream per (side, channel).
SIDE_FORWARD = 0
SIDE_BACKWARD = 1
CHANNEL_GAUSSIAN = 0
CHANNEL_POISSON = 1
CHANNEL_STABLE = 2
CHANNEL_QUADRATURE = 3


def substream(seed: int, side: int, channel: int) -> np.random.Generator:
    sequence = np.random.SeedSequence(int(seed), spawn_key=(side, channel))
    return np.random.Generator(np.random.Philox(sequence))


def derive_seed(seed: int, index: int) -> int:
    """Independent child seed, used to give L^1 and L^2 distinct roots."""
    sequence = np.random.SeedSequence(int(seed), spawn_key=(1000 + int(index),))
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


# ----------------------------------------------------------------------------
# Grid
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class SimulationGrid:
    t_start: float
    t_end: float
    dt: float

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise GridError(f"Grid step dt must be positive; got {self.dt}.")
        if not self.t_end > self.t_start:
            raise GridError(f"Grid end {self.t_end} must exceed start {self.t_start}.")
        if self.n < 1:
            raise GridError("Grid must contain at least one cell.")

    @property
    def n(self) -> int:
        return int(round((self.t_end - self.t_start) / self.dt))

    def nodes(self, *, past_cells: int = 0) -> np.ndarray:
        """Node k is t_start + k*dt; the final node is pinned to t_end."""
        k = np.arange(-past_cells, self.n + 1, dtype=float)
        nodes = self.t_start + k * self.dt
        nodes[-1] = self.t_end
        return nodes

    def cells_for(self, horizon: float) -> int:
        return int(np.ceil(horizon / self.dt - 1e-9))


# ----------------------------------------------------------------------------
# Jump measures and triplets
# ----------------------------------------------------------------------------

JUMP_DISTRIBUTIONS = {
    "constant": ("value",),
    "symmetric": ("value",),
    "normal": ("mean", "std"),
    "uniform": ("low", "high"),
    "exponential": ("scale",),
}


@dataclass(frozen=True)
class JumpDistribution:
    name: str
    params: Tuple[float, ...]

    def __post_init__(self) -> None:
        expected = JUMP_DISTRIBUTIONS.get(self.name)
        if expected is None:
            raise ParameterError(f"Unknown jump distribution {self.name!r}; known: {sorted(JUMP_DISTRIBUTIONS)}.")
        if len(self.params) != len(expected):
            raise ParameterError(f"Jump distribution {self.name!r} expects parameters {expected}.")

    def sample(self, rng: np.random.Generator, size: Tuple[int, int]) -> np.ndarray:
        p = self.params
        if self.name == "constant":
            return np.full(size, p[0])
        if self.name == "symmetric":
            return p[0] * rng.choice([-1.0, 1.0], size=size)
        if self.name == "normal":
            return rng.normal(p[0], p[1], size=size)
        if self.name == "uniform":
            return rng.uniform(p[0], p[1], size=size)
        return rng.exponential(p[0], size=size)

    def quadrature(self, order: int = 24) -> Tuple[np.ndarray, np.ndarray]:
        """Scalar nodes and probability weights for expectations over one jump."""
        p = self.params
        if self.name == "constant":
            return np.array([p[0]]), np.array([1.0])
        if self.name == "symmetric":
            return np.array([p[0], -p[0]]), np.array([0.5, 0.5])
        if self.name == "normal":
            nodes, weights = np.polynomial.hermite_e.hermegauss(order)
            return p[0] + p[1] * nodes, weights / weights.sum()
        if self.name == "uniform":
            nodes, weights = np.polynomial.legendre.leggauss(order)
            return p[0] + (p[1] - p[0]) * (nodes + 1.0) / 2.0, weights / weights.sum()
        nodes, weights = np.polynomial.laguerre.laggauss(order)
        return p[0] * nodes, weights / weights.sum()

    def mean_abs(self) -> float:
        nodes, weights = self.quadrature()
        return float(np.sum(np.abs(nodes) * weights))


@dataclass(frozen=True)
class NoJumps:
    kind: str = field(default="none", init=False)


@dataclass(frozen=True)
class CompoundPoisson:
    rate: float
    distribution: JumpDistribution
    kind: str = field(default="compound_poisson", init=False)

    def __post_init__(self) -> None:
        if not self.rate >= 0:
            raise ParameterError(f"Compound Poisson rate must be non-negative; got {self.rate}.")


@dataclass(frozen=True)
class AlphaStable:
    alpha: float
    scale: float = 1.0
    skew: float = 0.0
    kind: str = field(default="alpha_stable", init=False)

    def __post_init__(self) -> None:
        if not 1.0 < self.alpha < 2.0:
            raise ParameterError(f"alpha must lie in (1, 2) so that E|L_1| is finite; got {self.alpha}.")
        if not self.scale > 0:
            raise ParameterError(f"Stable scale must be positive; got {self.scale}.")
        if not -1.0 <= self.skew <= 1.0:
            raise ParameterError(f"Stable skew must lie in [-1, 1]; got {self.skew}.")


JumpMeasureSpec = Union[NoJumps, CompoundPoisson, AlphaStable]


@dataclass(frozen=True, eq=False)
class GeneratingTriplet:
    gamma: np.ndarray
    A: np.ndarray
    jump_measure: JumpMeasureSpec = NoJumps()

    def __post_init__(self) -> None:
        gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        d = gamma.size
        if A.shape == (1, 1) and d > 1:
            A = A[0, 0] * np.eye(d)
        if A.shape != (d, d):
            raise ParameterError(f"Covariance A must be {d}x{d}; got {A.shape}.")
        if not np.allclose(A, A.T):
            raise ParameterError("Covariance A must be symmetric.")
        eigenvalues, eigenvectors = np.linalg.eigh(A)
        if eigenvalues.min() < -1e-12 * max(1.0, abs(eigenvalues).max()):
            raise ParameterError("Covariance A must be positive semidefinite.")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "A", A)
        root = eigenvectors * np.sqrt(np.clip(eigenvalues, 0.0, None))
        object.__setattr__(self, "_root", root)

    @property
    def dim(self) -> int:
        return self.gamma.size

    @property
    def covariance_root(self) -> np.ndarray:
        return self._root

    @classmethod
    def scalar(cls, gamma: float = 0.0, variance: float = 0.0, jump_measure: JumpMeasureSpec = NoJumps()) -> "GeneratingTriplet":
        return cls(np.array([gamma]), np.array([[variance]]), jump_measure)

    def describe(self) -> Dict[str, object]:
        measure = self.jump_measure
        payload: Dict[str, object] = {
            "gamma": self.gamma.tolist(),
            "A": self.A.tolist(),
            "jump_measure": measure.kind,
        }
        if isinstance(measure, CompoundPoisson):
            payload["rate"] = measure.rate
            payload["distribution"] = measure.distribution.name
            payload["distribution_params"] = list(measure.distribution.params)
        elif isinstance(measure, AlphaStable):
            payload.update(alpha=measure.alpha, scale=measure.scale, skew=measure.skew)
        return payload


# ----------------------------------------------------------------------------
# Realizations
# ----------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NoiseRealization:
    path: CadlagPath
    seed: int
    grid: SimulationGrid
    triplet: GeneratingTriplet

    @property
    def jump_table(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.path.jump_times, self.path.jump_sizes

    def covers(self, start: float, end: float) -> bool:
        return self.path.covers(start, end)


@dataclass(frozen=True, eq=False)
class LevyComponents:
    """Per-cell increments of one side, kept separate for the general integrator."""

    nodes: np.ndarray
    drift: np.ndarray
    gaussian: np.ndarray
    stable: np.ndarray
    jump_times: np.ndarray
    jump_sizes: np.ndarray

    @property
    def continuous(self) -> np.ndarray:
        return self.drift + self.gaussian + self.stable


def _stable_variates(measure: AlphaStable, rng: np.random.Generator, size: Tuple[int, int]) -> np.ndarray:
    """Chambers-Mallows-Stuck transform for S_alpha(1, skew, 0), alpha != 1."""
    alpha, skew = measure.alpha, measure.skew
    v = rng.uniform(-np.pi / 2.0, np.pi / 2.0, size=size)
    w = rng.exponential(1.0, size=size)
    tan_term = skew * np.tan(np.pi * alpha / 2.0)
    b = np.arctan(tan_term) / alpha
    s = (1.0 + tan_term**2) ** (1.0 / (2.0 * alpha))
    return (
        s
        * np.sin(alpha * (v + b))
        / np.cos(v) ** (1.0 / alpha)
        * (np.cos(v - alpha * (v + b)) / w) ** ((1.0 - alpha) / alpha)
    )


def _poisson_arrivals(rate: float, horizon: float, rng: np.random.Generator) -> np.ndarray:
    arrivals = []
    clock = 0.0
    if rate <= 0:
        return np.empty(0)
    while True:
        clock += rng.exponential(1.0 / rate)
        if clock > horizon:
            break
        arrivals.append(clock)
    return np.asarray(arrivals, dtype=float)


def sample_components(triplet: GeneratingTriplet, horizon: float, dt: float, seed: int, side: int = SIDE_FORWARD) -> LevyComponents:
    """Independent increments of the Levy-Ito parts on [0, horizon] (local time axis)."""
    grid = SimulationGrid(0.0, horizon, dt)
    nodes = grid.nodes()
    steps = np.diff(nodes)
    d = triplet.dim
    n = steps.size

    drift = steps[:, None] * triplet.gamma[None, :]
    gaussian = np.zeros((n, d))
    if np.any(triplet.A):
        normals = substream(seed, side, CHANNEL_GAUSSIAN).standard_normal((n, d))
        gaussian = (normals * np.sqrt(steps)[:, None]) @ triplet.covariance_root.T

    stable = np.zeros((n, d))
    jump_times = np.empty(0)
    jump_sizes = np.empty((0, d))
    measure = triplet.jump_measure
    if isinstance(measure, AlphaStable):
        variates = _stable_variates(measure, substream(seed, side, CHANNEL_STABLE), (n, d))
        stable = measure.scale * steps[:, None] ** (1.0 / measure.alpha) * variates
    elif isinstance(measure, CompoundPoisson):
        rng = substream(seed, side, CHANNEL_POISSON)
        jump_times = _poisson_arrivals(measure.rate, horizon, rng)
        jump_sizes = measure.distribution.sample(rng, (jump_times.size, d))
    return LevyComponents(nodes, drift, gaussian, stable, jump_times, jump_sizes)


def _assemble_path(components: LevyComponents) -> CadlagPath:
    nodes = components.nodes
    level = np.vstack([np.zeros((1, components.drift.shape[1])), np.cumsum(components.continuous, axis=0)])
    taus = components.jump_times
    if taus.size == 0:
        return CadlagPath(nodes, level)

    on_node = np.isin(taus, nodes)
    times = np.union1d(nodes, taus)
    continuous = np.column_stack([np.interp(times, nodes, level[:, j]) for j in range(level.shape[1])])
    cumulative = np.vstack([np.zeros((1, level.shape[1])), np.cumsum(components.jump_sizes, axis=0)])
    right_count = np.searchsorted(taus, times, side="right")
    left_count = np.searchsorted(taus, times, side="left")
    values = continuous + cumulative[right_count]
    left = continuous + cumulative[left_count]
    if np.any(on_node):
        logger.debug("%d jump(s) coincide with grid nodes and were merged", int(on_node.sum()))
    return CadlagPath(times, values, left)


def sample_levy_path(triplet: GeneratingTriplet, grid: SimulationGrid, seed: int) -> NoiseRealization:
    """One-sided sample path on the grid, started from zero at grid.t_start."""
    components = sample_components(triplet, grid.t_end - grid.t_start, grid.dt, seed, SIDE_FORWARD)
    local = _assemble_path(components)
    path = local.retime(grid.t_start) if grid.t_start != 0 else local
    return NoiseRealization(path=path, seed=int(seed), grid=grid, triplet=triplet)


def build_two_sided(
    triplet: GeneratingTriplet,
    T_past: float,
    T_future: float,
    dt: float,
    seed: int,
) -> NoiseRealization:
    """
    Two-sided path on [-T_past, T_future] with L(0) = 0.

    The past is an independent copy run backwards: L(-t) = -L~(t-), so the
    glued path stays cadlag at every jump.
    """
    if not (T_past > 0 and T_future > 0):
        raise ParameterError(f"Horizons must be positive; got T_past={T_past}, T_future={T_future}.")
    forward = _assemble_path(sample_components(triplet, T_future, dt, seed, SIDE_FORWARD))
    backward = _assemble_path(sample_components(triplet, T_past, dt, seed, SIDE_BACKWARD))

    back_times = -backward.times[::-1]
    back_left, back_values = _reversed_limits(backward)

    times = np.concatenate([back_times[:-1], forward.times])
    values = np.vstack([back_values[:-1], forward.values])
    left = np.vstack([back_left[:-1], forward.left_values])
    grid = SimulationGrid(float(times[0]), float(times[-1]), dt)
    path = CadlagPath(times, values, left)
    logger.debug("Built two-sided noise on [%s, %s] with %d jumps", times[0], times[-1], int(path.jump_mask.sum()))
    return NoiseRealization(path=path, seed=int(seed), grid=grid, triplet=triplet)


def _reversed_limits(backward: CadlagPath) -> Tuple[np.ndarray, np.ndarray]:
    """Left limits and values of u -> -L~((-u)-) on the reversed knot set."""
    values = -backward.left_values[::-1]
    left = -backward.values[::-1]
    return left, values


def noise_path(noise) -> CadlagPath:
    """Accept either a realization or a bare path."""
    return noise.path if isinstance(noise, NoiseRealization) else noise


def empirical_drift(realization: NoiseRealization, t_eval: float) -> np.ndarray:
    if t_eval == 0:
        raise DomainError("empirical_drift is undefined at t_eval = 0.")
    return realization.path.eval(t_eval) / t_eval


__all__ = [
    "AlphaStable",
    "CompoundPoisson",
    "GeneratingTriplet",
    "JumpDistribution",
    "JumpMeasureSpec",
    "LevyComponents",
    "NoJumps",
    "NoiseRealization",
    "SimulationGrid",
    "build_two_sided",
    "derive_seed",
    "empirical_drift",
    "noise_path",
    "sample_components",
    "sample_levy_path",
    "substream",
]

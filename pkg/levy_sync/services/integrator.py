from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import expm

from ..conf import get_setting
from ..exceptions import CapabilityError, DivergenceError, DomainError, ParameterError
from .cadlag_path import CadlagPath
from .levy_process import (
    AlphaStable,
    CompoundPoisson,
    GeneratingTriplet,
    NoiseRealization,
    SimulationGrid,
    sample_components,
    noise_path,
    substream,
    CHANNEL_QUADRATURE,
)

logger = logging.getLogger(__name__)

Drift = Callable[[np.ndarray], np.ndarray]
NoiseLike = Union[CadlagPath, NoiseRealization]

# Pairs closer than this are redrawn by the dissipativity estimator.
DEGENERATE_PAIR = 1e-12
GROWTH_PER_DOUBLING = 1.5


def coefficient_matrix(coefficient, state_dim: int, noise_dim: int) -> np.ndarray:
    """
    Normalize a noise intensity to a (state_dim, noise_dim) matrix.

    A scalar scales the identity, a vector of length state_dim is a column for
    scalar noise or a diagonal for noise of the state's dimension.
    """
    array = np.asarray(coefficient, dtype=float)
    if array.ndim == 0:
        if noise_dim == 1:
            return np.full((state_dim, 1), float(array))
        if noise_dim != state_dim:
            raise ParameterError(f"Scalar intensity needs noise of dimension {state_dim} or 1; got {noise_dim}.")
        return float(array) * np.eye(state_dim)
    if array.ndim == 1:
        if array.size != state_dim:
            raise ParameterError(f"Intensity vector has length {array.size}; state dimension is {state_dim}.")
        if noise_dim == 1:
            return array.reshape(state_dim, 1)
        if noise_dim == state_dim:
            return np.diag(array)
        raise ParameterError(f"Intensity vector cannot drive noise of dimension {noise_dim}.")
    if array.shape != (state_dim, noise_dim):
        raise ParameterError(f"Intensity matrix must be {state_dim}x{noise_dim}; got {array.shape}.")
    return array


@dataclass(frozen=True, eq=False)
class NoiseChannel:
    coefficient: object
    noise: CadlagPath

    def __post_init__(self) -> None:
        object.__setattr__(self, "noise", noise_path(self.noise))

    def shifted(self, t_shift: float) -> "NoiseChannel":
        return NoiseChannel(self.coefficient, self.noise.shift(t_shift))


@dataclass(frozen=True, eq=False)
class AdditiveSdeSpec:
    """
    dY = (M Y + f(Y)) dt + sum_i coeff_i dL_i.

    ``linear_part`` M is optional; when present it is propagated exactly by
    the exponential-Euler step, otherwise the step is plain Euler-Maruyama.
    """

    f: Drift
    noise_coeff: object = 0.0
    noise: Optional[NoiseLike] = None
    linear_part: Optional[np.ndarray] = None
    dim: int = 1
    extra_channels: Tuple[NoiseChannel, ...] = field(default_factory=tuple)

    @property
    def channels(self) -> Tuple[NoiseChannel, ...]:
        head = () if self.noise is None else (NoiseChannel(self.noise_coeff, self.noise),)
        return head + tuple(self.extra_channels)

    def drift_at(self, y) -> np.ndarray:
        """Full drift M y + f(y)."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        value = np.asarray(self.f(y), dtype=float).reshape(y.size)
        if self.linear_part is None:
            return value
        return np.asarray(self.linear_part, dtype=float) @ y + value

    def shifted(self, t_shift: float) -> "AdditiveSdeSpec":
        """Same equation driven by the shifted noise s -> L(t_shift + s) - L(t_shift)."""
        channels = [channel.shifted(t_shift) for channel in self.channels]
        if not channels:
            return self
        head, rest = channels[0], tuple(channels[1:])
        return replace(self, noise_coeff=head.coefficient, noise=head.noise, extra_channels=rest)


@dataclass(frozen=True, eq=False)
class GeneralSdeSpec:
    """
    dY = b(Y-)dt + sigma(Y-)dB + int_{|x|<c} F(Y-, x) N~(dt, dx) + int_{|x|>=c} G(Y-, x) N(dt, dx).

    The triplet's drift gamma is not used: deterministic drift belongs in ``b``.
    """

    b: Drift
    triplet: GeneratingTriplet
    sigma: Optional[Callable[[np.ndarray], np.ndarray]] = None
    F: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    G: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    cutoff: float = 1.0

    def __post_init__(self) -> None:
        if not self.cutoff > 0:
            raise ParameterError(f"Jump cutoff c must be positive; got {self.cutoff}.")

    def diffusion_covariance(self, y: np.ndarray) -> np.ndarray:
        """a(y, y) = sigma(y) sigma(y)^T."""
        matrix = _sigma_matrix(self.sigma, y, self.triplet.dim)
        return matrix @ matrix.T


@dataclass(frozen=True)
class DissipativityEstimate:
    l_hat: float
    sample_count: int
    domain_radius: float
    violated: bool


class LinearGrowthCheck(NamedTuple):
    bounded: bool
    worst_ratio: float
    radius_ratios: List[Tuple[float, float]]


class _Propagator:
    """Cached (e^{Mh}, int_0^h e^{Mu} du) pairs keyed by step length."""

    CACHE_LIMIT = 4096

    def __init__(self, linear_part: np.ndarray) -> None:
        self.M = np.asarray(linear_part, dtype=float)
        self._cache: Dict[float, Tuple[np.ndarray, np.ndarray]] = {}

    def __call__(self, h: float) -> Tuple[np.ndarray, np.ndarray]:
        hit = self._cache.get(h)
        if hit is not None:
            return hit
        d = self.M.shape[0]
        augmented = np.zeros((2 * d, 2 * d))
        augmented[:d, :d] = self.M * h
        augmented[:d, d:] = np.eye(d) * h
        exponential = expm(augmented)
        hit = (exponential[:d, :d], exponential[:d, d:])
        if len(self._cache) >= self.CACHE_LIMIT:
            self._cache.clear()
        self._cache[h] = hit
        return hit


def _guard(y: np.ndarray, time: float, limit: float) -> None:
    if not np.all(np.isfinite(y)) or np.linalg.norm(y) > limit:
        raise DivergenceError(f"State norm exceeded {limit:g} at t={time:.6g}.", time=float(time))


def _sigma_matrix(sigma, y: np.ndarray, noise_dim: int) -> np.ndarray:
    d = y.size
    if sigma is None:
        return np.zeros((d, noise_dim))
    value = np.asarray(sigma(y), dtype=float)
    if value.ndim == 0:
        return float(value) * np.eye(d, noise_dim)
    return value.reshape(d, noise_dim)


def jump_adapted_nodes(nodes: np.ndarray, paths: Sequence[CadlagPath]) -> np.ndarray:
    start, end = float(nodes[0]), float(nodes[-1])
    extra = [path.jump_times[(path.jump_times > start) & (path.jump_times <= end)] for path in paths]
    if not extra:
        return nodes
    return np.union1d(nodes, np.concatenate(extra))


def integrate_on_nodes(spec: AdditiveSdeSpec, nodes: np.ndarray, y0) -> CadlagPath:
    y = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    d = y.size
    n = nodes.size
    limit = float(get_setting("LEVY_SYNC_DIVERGENCE_GUARD"))

    continuous = np.zeros((n - 1, d))
    jumps = np.zeros((n, d))
    for channel in spec.channels:
        path = channel.noise
        if not path.covers(float(nodes[0]), float(nodes[-1])):
            raise DomainError(
                f"Noise on [{path.t_start}, {path.t_end}] does not cover the integration "
                f"window [{nodes[0]}, {nodes[-1]}]."
            )
        B = coefficient_matrix(channel.coefficient, d, path.dim)
        at_nodes = path.eval_many(nodes)
        before = path.left_limit_many(nodes[1:])
        continuous += (before - at_nodes[:-1]) @ B.T
        jumps[1:] += (at_nodes[1:] - before) @ B.T

    steps = np.diff(nodes)
    values = np.empty((n, d))
    left = np.empty((n, d))
    values[0] = left[0] = y
    propagator = None if spec.linear_part is None else _Propagator(spec.linear_part)
    f = spec.f

    for k in range(n - 1):
        h = float(steps[k])
        drift = np.asarray(f(y), dtype=float).reshape(d)
        if propagator is None:
            y_minus = y + h * drift + continuous[k]
        else:
            E, P = propagator(h)
            y_minus = E @ y + P @ (drift + continuous[k] / h)
        _guard(y_minus, nodes[k + 1], limit)
        left[k + 1] = y_minus
        y = y_minus + jumps[k + 1]
        values[k + 1] = y
    return CadlagPath(nodes, values, left)


def integrate_additive(spec: AdditiveSdeSpec, grid: SimulationGrid, y0) -> CadlagPath:
    """Jump-adapted Euler-Maruyama on grid nodes plus the noise jump times."""
    nodes = jump_adapted_nodes(grid.nodes(), [channel.noise for channel in spec.channels])
    return integrate_on_nodes(spec, nodes, y0)


def _compensator(spec: GeneralSdeSpec, measure: CompoundPoisson):
    if spec.F is None or measure.rate == 0:
        return None
    if spec.triplet.dim != 1:
        raise CapabilityError("The compensated small-jump channel supports scalar jumps only.")
    xs, weights = measure.distribution.quadrature()
    small = np.abs(xs) < spec.cutoff
    xs, weights = xs[small], weights[small]
    if xs.size == 0:
        return None

    def correction(y: np.ndarray) -> np.ndarray:
        total = sum(w * np.asarray(spec.F(y, np.array([x])), dtype=float) for x, w in zip(xs, weights))
        return -measure.rate * np.asarray(total, dtype=float).reshape(y.size)

    return correction


def integrate_general(
    spec: GeneralSdeSpec,
    grid: SimulationGrid,
    y0,
    seed: int,
    *,
    events: Optional[Sequence[Tuple[float, object]]] = None,
) -> CadlagPath:
    """
    Euler-Maruyama for the general jump SDE.

    Compound-Poisson jumps (and any explicit ``events``) are applied at their
    exact times with coefficients evaluated at the pre-jump state. Stable
    increments enter once per step through G (or additively when G is absent).
    """
    triplet = spec.triplet
    measure = triplet.jump_measure
    if isinstance(measure, AlphaStable) and spec.F is not None:
        raise CapabilityError("The F channel needs a finite-activity jump measure; alpha-stable noise is not supported.")

    y = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    d = y.size
    r = triplet.dim
    limit = float(get_setting("LEVY_SYNC_DIVERGENCE_GUARD"))

    components = sample_components(triplet, grid.t_end - grid.t_start, grid.dt, seed)
    cell_nodes = components.nodes + grid.t_start
    cell_nodes[-1] = grid.t_end
    gaussian = np.vstack([np.zeros((1, r)), np.cumsum(components.gaussian, axis=0)])
    stable = np.vstack([np.zeros((1, r)), np.cumsum(components.stable, axis=0)])

    arrivals: Dict[float, List[np.ndarray]] = {}
    for tau, size in zip(components.jump_times + grid.t_start, components.jump_sizes):
        arrivals.setdefault(float(tau), []).append(np.atleast_1d(size))
    for tau, size in events or ():
        tau = float(tau)
        if not grid.t_start < tau <= grid.t_end:
            raise DomainError(f"Event time {tau} is outside ({grid.t_start}, {grid.t_end}].")
        arrivals.setdefault(tau, []).append(np.atleast_1d(np.asarray(size, dtype=float)))

    nodes = np.union1d(cell_nodes, np.fromiter(arrivals.keys(), dtype=float)) if arrivals else cell_nodes
    gaussian_at = np.column_stack([np.interp(nodes, cell_nodes, gaussian[:, j]) for j in range(r)])
    stable_at = np.column_stack([np.interp(nodes, cell_nodes, stable[:, j]) for j in range(r)])
    has_stable = isinstance(measure, AlphaStable)
    compensator = _compensator(spec, measure) if isinstance(measure, CompoundPoisson) else None

    n = nodes.size
    values = np.empty((n, d))
    left = np.empty((n, d))
    values[0] = left[0] = y
    for k in range(n - 1):
        h = float(nodes[k + 1] - nodes[k])
        drift = np.asarray(spec.b(y), dtype=float).reshape(d)
        if compensator is not None:
            drift = drift + compensator(y)
        increment = h * drift
        if spec.sigma is not None:
            increment = increment + _sigma_matrix(spec.sigma, y, r) @ (gaussian_at[k + 1] - gaussian_at[k])
        if has_stable:
            delta = stable_at[k + 1] - stable_at[k]
            pushed = delta if spec.G is None else spec.G(y, delta)
            increment = increment + np.asarray(pushed, dtype=float).reshape(d)
        y = y + increment
        _guard(y, nodes[k + 1], limit)
        left[k + 1] = y
        for size in arrivals.get(float(nodes[k + 1]), ()):
            y = y + _jump_effect(spec, y, size)
        _guard(y, nodes[k + 1], limit)
        values[k + 1] = y
    return CadlagPath(nodes, values, left)


def _jump_effect(spec: GeneralSdeSpec, y: np.ndarray, size: np.ndarray) -> np.ndarray:
    large = np.linalg.norm(size) >= spec.cutoff
    coefficient = spec.G if (large or spec.F is None) else spec.F
    if coefficient is None:
        raise CapabilityError("A jump arrived but the equation defines neither F nor G.")
    return np.asarray(coefficient(y, size), dtype=float).reshape(y.size)


def _uniform_ball(rng: np.random.Generator, count: int, dim: int, radius: float) -> np.ndarray:
    directions = rng.standard_normal((count, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = radius * rng.uniform(0.0, 1.0, size=(count, 1)) ** (1.0 / dim)
    return directions * radii


def estimate_dissipativity(
    f: Drift,
    domain_radius: float,
    n_samples: int,
    seed: int,
    *,
    dim: int = 1,
    l_min: float = 0.0,
) -> DissipativityEstimate:
    """Smallest sampled -<dx, df>/|dx|^2 over uniform pairs in the ball."""
    if n_samples < 2:
        raise ParameterError(f"n_samples must be at least 2; got {n_samples}.")
    if not domain_radius > 0:
        raise ParameterError(f"domain_radius must be positive; got {domain_radius}.")
    rng = substream(seed, 0, CHANNEL_QUADRATURE)
    first = _uniform_ball(rng, n_samples, dim, domain_radius)
    second = _uniform_ball(rng, n_samples, dim, domain_radius)
    close = np.linalg.norm(first - second, axis=1) < DEGENERATE_PAIR
    while np.any(close):
        second[close] = _uniform_ball(rng, int(close.sum()), dim, domain_radius)
        close = np.linalg.norm(first - second, axis=1) < DEGENERATE_PAIR

    l_hat = np.inf
    for a, b in zip(first, second):
        dx = a - b
        df = np.asarray(f(a), dtype=float).reshape(dim) - np.asarray(f(b), dtype=float).reshape(dim)
        l_hat = min(l_hat, -float(dx @ df) / float(dx @ dx))
    logger.debug("Dissipativity estimate l_hat=%.6g over %d pairs (radius %g)", l_hat, n_samples, domain_radius)
    return DissipativityEstimate(
        l_hat=float(l_hat),
        sample_count=int(n_samples),
        domain_radius=float(domain_radius),
        violated=bool(l_hat <= l_min),
    )


def check_linear_growth(
    b: Drift,
    sigma: Optional[Callable[[np.ndarray], np.ndarray]],
    domain_radius: float,
    n_samples: int,
    seed: int,
    *,
    dim: int = 1,
    noise_dim: int = 1,
    doublings: int = 10,
) -> LinearGrowthCheck:
    """
    Probe (|b(y)|^2 + trace a(y, y)) / (1 + |y|)^2 on balls of doubling radius.

    Bounded means the per-radius maximum never grows by more than 1.5x from
    one doubling to the next.
    """
    if n_samples < 1:
        raise ParameterError(f"n_samples must be positive; got {n_samples}.")
    rng = substream(seed, 1, CHANNEL_QUADRATURE)
    by_radius: List[Tuple[float, float]] = []
    for k in range(doublings + 1):
        radius = domain_radius * 2.0**k
        worst = 0.0
        for y in _uniform_ball(rng, n_samples, dim, radius):
            drift = np.asarray(b(y), dtype=float).reshape(dim)
            diffusion = _sigma_matrix(sigma, y, noise_dim)
            ratio = (float(drift @ drift) + float(np.sum(diffusion**2))) / (1.0 + np.linalg.norm(y)) ** 2
            worst = max(worst, ratio)
        by_radius.append((radius, worst))

    bounded = True
    for (_, previous), (radius, current) in zip(by_radius[:-1], by_radius[1:]):
        if current > GROWTH_PER_DOUBLING * previous and current > 0:
            logger.debug("Growth ratio jumped from %.4g to %.4g at radius %g", previous, current, radius)
            bounded = False
            break
    return LinearGrowthCheck(bounded, max(ratio for _, ratio in by_radius), by_radius)


def flow_residual(spec: AdditiveSdeSpec, y0, s: float, t: float, dt: float) -> float:
    """
    sup_u |phi(s + u, w, y0) - phi(u, theta_s w, phi(s, w, y0))| over u in [0, t].

    The base flow starts at time 0.
    """
    if not (s > 0 and t > 0):
        raise ParameterError(f"Flow times must be positive; got s={s}, t={t}.")
    full = integrate_additive(spec, SimulationGrid(0.0, s + t, dt), y0)
    head = integrate_additive(spec, SimulationGrid(0.0, s, dt), y0)
    tail = integrate_additive(spec.shifted(s), SimulationGrid(0.0, t, dt), head.values[-1])
    reference = full.eval_many(np.clip(tail.times + s, 0.0, s + t))
    return float(np.linalg.norm(reference - tail.values, axis=1).max())


__all__ = [
    "AdditiveSdeSpec",
    "DissipativityEstimate",
    "GeneralSdeSpec",
    "LinearGrowthCheck",
    "NoiseChannel",
    "check_linear_growth",
    "coefficient_matrix",
    "estimate_dissipativity",
    "flow_residual",
    "integrate_additive",
    "integrate_general",
    "integrate_on_nodes",
    "jump_adapted_nodes",
]

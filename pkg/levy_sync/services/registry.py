from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import ParameterError
from .levy_process import (
    JUMP_DISTRIBUTIONS,
    AlphaStable,
    CompoundPoisson,
    GeneratingTriplet,
    JumpDistribution,
    NoJumps,
)


class DriftFunction:
    """
    Registry drift f(y) = -linear * y + remainder(y), applied componentwise.

    Keeping the linear coefficient separate lets the integrator propagate it
    exactly together with the coupling.
    """

    def __init__(
        self,
        name: str,
        params: Tuple[float, ...],
        linear: float,
        remainder: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    ) -> None:
        self.name = name
        self.params = tuple(float(p) for p in params)
        self.linear = float(linear)
        self._remainder = remainder

    def remainder(self, y):
        y = np.asarray(y, dtype=float)
        if self._remainder is None:
            return np.zeros_like(y)
        return self._remainder(y)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return -self.linear * y + self.remainder(y)

    @property
    def label(self) -> str:
        return f"{self.name}({', '.join(f'{p:g}' for p in self.params)})"

    def __repr__(self) -> str:
        return f"DriftFunction({self.label})"


def linear_drift(a: float = 1.0) -> DriftFunction:
    return DriftFunction("linear", (a,), a)


def affine_drift(a: float = 1.0, b: float = 0.0) -> DriftFunction:
    return DriftFunction("affine", (a, b), a, lambda y: np.full_like(y, -b))


def cubic_drift(a: float = 1.0) -> DriftFunction:
    return DriftFunction("cubic", (a,), a, lambda y: -(y**3))


def polynomial_drift(*coefficients: float) -> DriftFunction:
    """f(y) = -(c0 + c1 y + c2 y^2 + ...)."""
    if not coefficients:
        raise ParameterError("Field 'coefficients' needs at least one value.")
    coeffs = np.asarray(coefficients, dtype=float)
    rest = coeffs.copy()
    linear = float(rest[1]) if rest.size > 1 else 0.0
    if rest.size > 1:
        rest[1] = 0.0
    return DriftFunction("polynomial", tuple(coeffs), linear, lambda y: -np.polynomial.polynomial.polyval(y, rest))


@dataclass(frozen=True)
class RegistryEntry:
    builder: Callable
    params: Tuple[Tuple[str, Optional[float]], ...]
    description: str
    variadic: bool = False


DRIFTS: Dict[str, RegistryEntry] = {
    "linear": RegistryEntry(linear_drift, (("a", 1.0),), "y -> -a*y"),
    "affine": RegistryEntry(affine_drift, (("a", 1.0), ("b", 0.0)), "y -> -(a*y + b)"),
    "cubic": RegistryEntry(cubic_drift, (("a", 1.0),), "y -> -(y^3 + a*y), dissipative for a > 0"),
    "polynomial": RegistryEntry(polynomial_drift, (("coefficients", None),), "y -> -(c0 + c1*y + c2*y^2 + ...)", True),
}


def build_drift(name: str, params: Sequence[float] = ()) -> DriftFunction:
    entry = DRIFTS.get(name)
    if entry is None:
        raise ParameterError(f"Unknown drift {name!r}; known: {', '.join(sorted(DRIFTS))}.")
    if entry.variadic:
        return entry.builder(*params)
    if len(params) > len(entry.params):
        raise ParameterError(f"Drift {name!r} takes at most {len(entry.params)} parameters; got {len(params)}.")
    return entry.builder(*params)


def _brownian(variance: float = 1.0, dim: int = 1) -> GeneratingTriplet:
    if variance < 0:
        raise ParameterError(f"Field 'variance' must be non-negative; got {variance}.")
    return GeneratingTriplet(np.zeros(dim), variance * np.eye(dim))


def _compound_poisson(
    rate: float = 1.0,
    distribution: str = "symmetric",
    distribution_params: Sequence[float] = (1.0,),
    variance: float = 0.0,
    dim: int = 1,
) -> GeneratingTriplet:
    law = JumpDistribution(distribution, tuple(float(p) for p in distribution_params))
    return GeneratingTriplet(np.zeros(dim), variance * np.eye(dim), CompoundPoisson(rate, law))


def _stable(alpha: float = 1.5, scale: float = 1.0, skew: float = 0.0, dim: int = 1) -> GeneratingTriplet:
    return GeneratingTriplet(np.zeros(dim), np.zeros((dim, dim)), AlphaStable(alpha, scale, skew))


def _pure_drift(gamma: float = 1.0, dim: int = 1) -> GeneratingTriplet:
    return GeneratingTriplet(np.full(dim, gamma), np.zeros((dim, dim)), NoJumps())


def _silent(dim: int = 1) -> GeneratingTriplet:
    return GeneratingTriplet(np.zeros(dim), np.zeros((dim, dim)))


NOISE_FAMILIES: Dict[str, RegistryEntry] = {
    "brownian": RegistryEntry(_brownian, (("variance", 1.0),), "Gaussian part only, A = variance * I"),
    "compound_poisson": RegistryEntry(
        _compound_poisson,
        (("rate", 1.0), ("distribution", None), ("distribution_params", None), ("variance", 0.0)),
        f"finite-activity jumps; distribution one of {', '.join(sorted(JUMP_DISTRIBUTIONS))}",
    ),
    "stable": RegistryEntry(_stable, (("alpha", 1.5), ("scale", 1.0), ("skew", 0.0)), "alpha-stable, 1 < alpha < 2"),
    "drift": RegistryEntry(_pure_drift, (("gamma", 1.0),), "deterministic L(t) = gamma * t"),
    "none": RegistryEntry(_silent, (), "identically zero noise"),
}


def build_noise(family: str, **params) -> GeneratingTriplet:
    entry = NOISE_FAMILIES.get(family)
    if entry is None:
        raise ParameterError(f"Unknown noise family {family!r}; known: {', '.join(sorted(NOISE_FAMILIES))}.")
    allowed = {name for name, _ in entry.params} | {"dim"}
    unknown = set(params) - allowed
    if unknown:
        raise ParameterError(f"Noise family {family!r} does not take {', '.join(sorted(unknown))}.")
    return entry.builder(**params)


@dataclass(frozen=True)
class Preset:
    f: Tuple[str, Tuple[float, ...]]
    g: Tuple[str, Tuple[float, ...]]
    alpha: float
    beta: float
    description: str


_COUPLED_EXAMPLE = Preset(
    f=("affine", (1.0, 1.0)),
    g=("affine", (1.0, 3.0)),
    alpha=1.0,
    beta=2.0,
    description="dX = -(X+1)dt + lam(Y-X)dt + dL1, dY = -(Y+3)dt + lam(X-Y)dt + 2 dL2",
)

# "coupled-example" is an alias of the reference name "paper-example".
PRESETS: Dict[str, Preset] = {
    "paper-example": _COUPLED_EXAMPLE,
    "coupled-example": _COUPLED_EXAMPLE,
}


def _format_params(entry: RegistryEntry) -> str:
    parts = []
    for name, default in entry.params:
        parts.append(name if default is None else f"{name}={default:g}")
    suffix = ", ..." if entry.variadic else ""
    return ", ".join(parts) + suffix


def list_registry() -> str:
    lines: List[str] = ["Drifts:"]
    for name, entry in sorted(DRIFTS.items()):
        lines.append(f"  {name}({_format_params(entry)})  {entry.description}")
    lines.append("Noise families:")
    for name, entry in sorted(NOISE_FAMILIES.items()):
        lines.append(f"  {name}({_format_params(entry)})  {entry.description}")
    lines.append("Presets:")
    for name, preset in sorted(PRESETS.items()):
        lines.append(
            f"  {name}  f={preset.f[0]}{preset.f[1]} g={preset.g[0]}{preset.g[1]} "
            f"alpha={preset.alpha:g} beta={preset.beta:g}  {preset.description}"
        )
    return "\n".join(lines)


__all__ = [
    "DRIFTS",
    "DriftFunction",
    "NOISE_FAMILIES",
    "PRESETS",
    "Preset",
    "affine_drift",
    "build_drift",
    "build_noise",
    "cubic_drift",
    "linear_drift",
    "list_registry",
    "polynomial_drift",
]

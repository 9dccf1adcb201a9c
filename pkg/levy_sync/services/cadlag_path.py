from __future__ import annotations

from typing import Iterable, Optional, Tuple

import numpy as np
from scipy.spatial.distance import pdist

from ..exceptions import DomainError, ParameterError

# Relative slack used when checking that a time lies inside a path's domain.
DOMAIN_SLACK = 1e-12


def _as_matrix(values, n: int) -> np.ndarray:
    array = np.asarray(values, dtype=float)
    if array.ndim == 1:
        array = array.reshape(n, 1)
    if array.ndim != 2 or array.shape[0] != n:
        raise ParameterError(f"Knot values must have shape ({n}, d); got {array.shape}.")
    return array


class CadlagPath:
    """
    Right-continuous path with left limits on [t_start, t_end].

    Knots are stored as three aligned arrays: strictly increasing ``times``,
    right values ``values`` and left limits ``left_values``. Between two
    consecutive knots the path is affine, running from ``values[k]`` to
    ``left_values[k + 1]``. A knot is a jump time iff its left limit differs
    from its value.
    """

    __slots__ = ("times", "values", "left_values")

    def __init__(self, times, values, left_values=None) -> None:
        times = np.asarray(times, dtype=float).ravel()
        n = times.size
        if n < 2:
            raise ParameterError("A path needs at least two knots (t_start < t_end).")
        if not np.all(np.diff(times) > 0):
            raise ParameterError("Knot times must be strictly increasing.")
        values = _as_matrix(values, n).copy()
        left = values.copy() if left_values is None else _as_matrix(left_values, n).copy()
        left[0] = values[0]
        for array in (times, values, left):
            array.setflags(write=False)
        self.times = times
        self.values = values
        self.left_values = left

    # ------------------------------------------------------------------
    # Constructors
    # ------------------------------------------------------------------

    @classmethod
    def constant(cls, value, t_start: float, t_end: float) -> "CadlagPath":
        row = np.atleast_1d(np.asarray(value, dtype=float))
        return cls([t_start, t_end], np.vstack([row, row]))

    @classmethod
    def step(
        cls,
        jump_times: Iterable[float],
        jump_sizes: Iterable[float],
        t_start: float,
        t_end: float,
        *,
        initial: float = 0.0,
    ) -> "CadlagPath":
        """Scalar piecewise-constant path with the given jumps inside (t_start, t_end]."""
        taus = np.asarray(list(jump_times), dtype=float)
        sizes = np.asarray(list(jump_sizes), dtype=float)
        order = np.argsort(taus, kind="stable")
        taus, sizes = taus[order], sizes[order]
        if taus.size and (taus[0] <= t_start or taus[-1] > t_end):
            raise ParameterError("Jump times must lie in (t_start, t_end].")
        times = [t_start]
        values = [initial]
        left = [initial]
        level = initial
        for tau, size in zip(taus, sizes):
            left.append(level)
            level += size
            times.append(tau)
            values.append(level)
        if times[-1] < t_end:
            times.append(t_end)
            values.append(level)
            left.append(level)
        return cls(times, values, left)

    # ------------------------------------------------------------------
    # Basic properties
    # ------------------------------------------------------------------

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def jump_mask(self) -> np.ndarray:
        return np.any(self.left_values != self.values, axis=1)

    @property
    def jump_times(self) -> np.ndarray:
        return self.times[self.jump_mask]

    @property
    def jump_sizes(self) -> np.ndarray:
        mask = self.jump_mask
        return self.values[mask] - self.left_values[mask]

    def is_piecewise_constant(self) -> bool:
        return bool(np.array_equal(self.values[:-1], self.left_values[1:]))

    def covers(self, start: float, end: float) -> bool:
        slack = DOMAIN_SLACK * max(1.0, abs(start), abs(end))
        return start >= self.t_start - slack and end <= self.t_end + slack

    def __repr__(self) -> str:
        return (
            f"CadlagPath([{self.t_start:g}, {self.t_end:g}], knots={self.times.size}, "
            f"dim={self.dim}, jumps={int(self.jump_mask.sum())})"
        )

    # ------------------------------------------------------------------
    # Evaluation
    # ------------------------------------------------------------------

    def _check_domain(self, ts: np.ndarray) -> None:
        if ts.size and not self.covers(float(ts.min()), float(ts.max())):
            raise DomainError(
                f"Time outside path domain [{self.t_start}, {self.t_end}]: "
                f"requested [{ts.min()}, {ts.max()}]."
            )

    def eval_many(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float).ravel()
        self._check_domain(ts)
        ts = np.clip(ts, self.t_start, self.t_end)
        times = self.times
        k = np.searchsorted(times, ts, side="right") - 1
        k = np.clip(k, 0, times.size - 1)
        on_knot = times[k] == ts
        nxt = np.minimum(k + 1, times.size - 1)
        span = times[nxt] - times[k]
        span[span == 0] = 1.0
        weight = ((ts - times[k]) / span)[:, None]
        interpolated = self.values[k] + weight * (self.left_values[nxt] - self.values[k])
        return np.where(on_knot[:, None], self.values[k], interpolated)

    def left_limit_many(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float).ravel()
        self._check_domain(ts)
        if ts.size and np.any(ts <= self.t_start):
            raise DomainError(f"Left limit is undefined at the domain start {self.t_start}.")
        ts = np.clip(ts, self.t_start, self.t_end)
        times = self.times
        k = np.searchsorted(times, ts, side="left")
        k = np.clip(k, 1, times.size - 1)
        on_knot = times[k] == ts
        prev = k - 1
        weight = ((ts - times[prev]) / (times[k] - times[prev]))[:, None]
        interpolated = self.values[prev] + weight * (self.left_values[k] - self.values[prev])
        return np.where(on_knot[:, None], self.left_values[k], interpolated)

    def eval(self, t: float) -> np.ndarray:
        return self.eval_many([t])[0]

    def left_limit(self, t: float) -> np.ndarray:
        return self.left_limit_many([t])[0]

    # ------------------------------------------------------------------
    # Path-space operators
    # ------------------------------------------------------------------

    def restrict(self, start: float, end: float) -> "CadlagPath":
        if not start < end:
            raise DomainError(f"Empty interval [{start}, {end}].")
        if not self.covers(start, end):
            raise DomainError(f"Interval [{start}, {end}] is outside [{self.t_start}, {self.t_end}].")
        inside = (self.times > start) & (self.times < end)
        times = np.concatenate([[start], self.times[inside], [end]])
        values = np.vstack([self.eval_many([start]), self.values[inside], self.eval_many([end])])
        left = np.vstack([values[:1], self.left_values[inside], self.left_limit_many([end])])
        return CadlagPath(times, values, left)

    def retime(self, offset: float) -> "CadlagPath":
        """Pure time translation: the new path at u equals this path at u - offset."""
        return CadlagPath(self.times + offset, self.values, self.left_values)

    def shift(self, t_shift: float, window: Optional[Tuple[float, float]] = None) -> "CadlagPath":
        """Noise shift s -> x(t_shift + s) - x(t_shift)."""
        if not self.covers(t_shift, t_shift):
            raise DomainError(f"Shift {t_shift} is outside [{self.t_start}, {self.t_end}].")
        anchor = self.eval(t_shift)
        shifted = CadlagPath(self.times - t_shift, self.values - anchor, self.left_values - anchor)
        if window is None:
            return shifted
        start, end = window
        if not shifted.covers(start, end):
            raise DomainError(
                f"Shifted window [{start}, {end}] underflows the available "
                f"[{shifted.t_start}, {shifted.t_end}]."
            )
        return shifted.restrict(start, end)

    def add_drift(self, rate) -> "CadlagPath":
        rate = np.atleast_1d(np.asarray(rate, dtype=float))
        line = self.times[:, None] * rate[None, :]
        return CadlagPath(self.times, self.values + line, self.left_values + line)

    def transform(self, coefficient) -> "CadlagPath":
        """Apply a constant linear map (scalar, vector for scalar paths, or matrix) to the values."""
        matrix = np.asarray(coefficient, dtype=float)
        if matrix.ndim == 0:
            return CadlagPath(self.times, self.values * matrix, self.left_values * matrix)
        if matrix.ndim == 1:
            matrix = matrix.reshape(-1, 1)
        return CadlagPath(self.times, self.values @ matrix.T, self.left_values @ matrix.T)

    def combine(self, other: "CadlagPath", a: float = 1.0, b: float = 1.0) -> "CadlagPath":
        """a*self + b*other on an identical knot set."""
        if not np.array_equal(self.times, other.times):
            raise DomainError("Paths must share knot times to be combined.")
        return CadlagPath(
            self.times,
            a * self.values + b * other.values,
            a * self.left_values + b * other.left_values,
        )

    def component(self, index: int) -> "CadlagPath":
        return CadlagPath(self.times, self.values[:, index], self.left_values[:, index])

    # ------------------------------------------------------------------
    # Suprema and moduli
    # ------------------------------------------------------------------

    def _interval_points(self, start: float, end: float, *, closed: bool) -> np.ndarray:
        if not start < end:
            raise DomainError(f"Empty interval [{start}, {end}].")
        if not self.covers(start, end):
            raise DomainError(f"Interval [{start}, {end}] is outside [{self.t_start}, {self.t_end}].")
        right_mask = (self.times >= start) & (self.times < end)
        left_mask = (self.times > start) & (self.times <= end)
        parts = [
            self.eval_many([start]),
            self.values[right_mask],
            self.left_values[left_mask],
            self.left_limit_many([end]),
        ]
        if closed:
            parts.append(self.eval_many([end]))
        return np.vstack(parts)

    def sup_norm(self, start: Optional[float] = None, end: Optional[float] = None) -> float:
        start = self.t_start if start is None else start
        end = self.t_end if end is None else end
        points = self._interval_points(start, end, closed=True)
        return float(np.linalg.norm(points, axis=1).max())

    def oscillation(self, start: float, end: float, *, closed: bool = True) -> float:
        """
        sup |x(s) - x(t)| over s, t in the interval, including the left limit at
        its right endpoint. With ``closed=False`` the interval is [start, end).
        """
        points = self._interval_points(start, end, closed=closed)
        if points.shape[1] == 1:
            return float(np.ptp(points[:, 0]))
        return float(pdist(points).max()) if points.shape[0] > 1 else 0.0

    def cadlag_modulus(self, delta: float, *, mesh: str = "paper") -> float:
        """
        Greedy estimate of w'_x(delta).

        ``mesh="paper"`` (alias ``"short"``) keeps every partition cell shorter than delta;
        ``mesh="classical"`` keeps every cell longer than delta. Partition points
        are placed at jump times first, then cells are split uniformly.
        """
        if not 0.0 < delta < 1.0:
            raise ParameterError(f"delta must lie in (0, 1); got {delta}.")
        if mesh not in {"paper", "short", "classical"}:
            raise ParameterError(f"Unknown mesh convention {mesh!r}.")
        start, end = self.t_start, self.t_end
        jumps = [float(t) for t in self.jump_times if start < t < end]
        if mesh != "classical":
            anchors = [start, *jumps, end]
        else:
            anchors = [start]
            for tau in jumps:
                if tau - anchors[-1] > delta and end - tau > delta:
                    anchors.append(tau)
            anchors.append(end)

        worst = 0.0
        for left, right in zip(anchors[:-1], anchors[1:]):
            length = right - left
            if mesh != "classical":
                pieces = int(np.floor(length / delta)) + 1
            else:
                pieces = max(1, int(np.ceil(length / delta)) - 1)
            cuts = left + (right - left) * np.arange(pieces + 1) / pieces
            cuts[-1] = right
            for a, b in zip(cuts[:-1], cuts[1:]):
                worst = max(worst, self.oscillation(float(a), float(b), closed=False))
        return worst


def shift(x: CadlagPath, t_shift: float, window: Optional[Tuple[float, float]] = None) -> CadlagPath:
    return x.shift(t_shift, window)


def oscillation(x: CadlagPath, start: float, end: float) -> float:
    return x.oscillation(start, end)


def cadlag_modulus(x: CadlagPath, delta: float, *, mesh: str = "paper") -> float:
    return x.cadlag_modulus(delta, mesh=mesh)


def sup_norm(x: CadlagPath, start: Optional[float] = None, end: Optional[float] = None) -> float:
    return x.sup_norm(start, end)


__all__ = [
    "CadlagPath",
    "cadlag_modulus",
    "oscillation",
    "shift",
    "sup_norm",
]

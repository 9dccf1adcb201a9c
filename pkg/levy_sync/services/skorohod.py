from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from ..conf import get_setting
from ..exceptions import DomainError, OracleCapacityError, ParameterError
from .cadlag_path import CadlagPath

logger = logging.getLogger(__name__)

ORACLE_MAX_JUMPS = 3
# Above this many events per side the DP only looks a few events back.
FULL_DP_EVENTS = 16
SKIP_WINDOW = 4
LINK_BATCH = 8
INITIAL_CELLS = 8
# Resampling density for the tent-weighted paths of non-step inputs.
WEIGHT_SAMPLES_PER_UNIT = 256
BAND_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class TimeChange:
    """Piecewise-affine increasing bijection of [-m, m] given by (t, lambda(t)) breakpoints."""

    breakpoints: np.ndarray
    m: float

    def __post_init__(self) -> None:
        points = np.asarray(self.breakpoints, dtype=float)
        if points.ndim != 2 or points.shape[1] != 2 or points.shape[0] < 2:
            raise ParameterError("Time change breakpoints must be an (n, 2) array with n >= 2.")
        m = float(self.m)
        if not m > 0:
            raise ParameterError(f"Half-width m must be positive; got {m}.")
        if not (np.isclose(points[0, 0], -m) and np.isclose(points[0, 1], -m)):
            raise ParameterError(f"Time change must fix -m={-m}; starts at {tuple(points[0])}.")
        if not (np.isclose(points[-1, 0], m) and np.isclose(points[-1, 1], m)):
            raise ParameterError(f"Time change must fix m={m}; ends at {tuple(points[-1])}.")
        if not (np.all(np.diff(points[:, 0]) > 0) and np.all(np.diff(points[:, 1]) > 0)):
            raise ParameterError("Time change must be strictly increasing.")
        points = points.copy()
        points[0] = (-m, -m)
        points[-1] = (m, m)
        points.setflags(write=False)
        object.__setattr__(self, "breakpoints", points)
        object.__setattr__(self, "m", m)

    @classmethod
    def identity(cls, m: float) -> "TimeChange":
        return cls(np.array([[-m, -m], [m, m]]), m)

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.breakpoints[:, 1]) / np.diff(self.breakpoints[:, 0])

    def log_slope_sup(self) -> float:
        return float(np.max(np.abs(np.log(self.slopes))))

    def __call__(self, t):
        return np.interp(t, self.breakpoints[:, 0], self.breakpoints[:, 1])

    def inverse(self, s):
        return np.interp(s, self.breakpoints[:, 1], self.breakpoints[:, 0])


@dataclass(frozen=True, eq=False)
class MetricResult:
    value: float
    witness: TimeChange
    certified_gap: float
    refinements: Tuple[Tuple[int, float], ...] = ()


@dataclass(frozen=True)
class GlobalMetric:
    value: float
    uncertainty: float
    terms: Tuple[float, ...] = field(default_factory=tuple)


class _Knots:
    """Fast right-value and left-limit evaluation of a path restricted to [-m, m]."""

    def __init__(self, path: CadlagPath, m: float) -> None:
        window = path.restrict(-m, m)
        self.times = window.times
        self.values = window.values
        self.left = window.left_values

    def inside(self, starts: np.ndarray, end: float) -> Tuple[np.ndarray, np.ndarray]:
        """Knot indices strictly inside (starts[k], end), flattened, with their owner k."""
        lo = np.searchsorted(self.times, starts, side="right")
        hi = np.searchsorted(self.times, end, side="left")
        lengths = np.maximum(hi - lo, 0)
        owner = np.repeat(np.arange(starts.size), lengths)
        offsets = np.cumsum(lengths) - lengths
        index = np.arange(int(lengths.sum())) - np.repeat(offsets, lengths) + np.repeat(lo, lengths)
        return index, owner

    def right(self, ts: np.ndarray) -> np.ndarray:
        times = self.times
        k = np.clip(np.searchsorted(times, ts, side="right") - 1, 0, times.size - 2)
        weight = ((ts - times[k]) / (times[k + 1] - times[k]))[:, None]
        result = self.values[k] + weight * (self.left[k + 1] - self.values[k])
        at_end = ts >= times[-1]
        if np.any(at_end):
            result[at_end] = self.values[-1]
        return result

    def left_limit(self, ts: np.ndarray) -> np.ndarray:
        times = self.times
        k = np.clip(np.searchsorted(times, ts, side="left") - 1, 0, times.size - 2)
        weight = ((ts - times[k]) / (times[k + 1] - times[k]))[:, None]
        return self.values[k] + weight * (self.left[k + 1] - self.values[k])


def _segment_values(
    x: _Knots, y: _Knots, a0: np.ndarray, a1: float, b0: np.ndarray, b1: float, closed: bool
) -> np.ndarray:
    """
    sup |x(t) - y(lam_k(t))| for each lam_k affine from [a0[k], a1] onto [b0[k], b1].

    Both sides are affine between the knots of x and the preimages of the
    knots of y, so every sup is attained at those points (right values and
    left limits).
    """
    a0 = np.asarray(a0, dtype=float)
    b0 = np.asarray(b0, dtype=float)
    slope = (b1 - b0) / (a1 - a0)
    x_index, x_owner = x.inside(a0, a1)
    y_index, y_owner = y.inside(b0, b1)
    x_t = x.times[x_index]
    y_s = y.times[y_index]
    x_image = b0[x_owner] + (x_t - a0[x_owner]) * slope[x_owner]
    y_preimage = a0[y_owner] + (y_s - b0[y_owner]) / slope[y_owner]

    gaps = _values_norm(x.right(a0) - y.right(b0))
    inner_t = np.concatenate([x_t, y_preimage])
    if inner_t.size:
        inner_s = np.concatenate([x_image, y_s])
        owner = np.concatenate([x_owner, y_owner])
        np.maximum.at(gaps, owner, _values_norm(x.right(inner_t) - y.right(inner_s)))
        np.maximum.at(gaps, owner, _values_norm(x.left_limit(inner_t) - y.left_limit(inner_s)))
    end = _values_norm(x.left_limit(np.array([a1])) - y.left_limit(np.array([b1])))[0]
    if closed:
        end = max(end, _values_norm(x.right(np.array([a1])) - y.right(np.array([b1])))[0])
    return np.maximum(gaps, end)


def _segment_value(x: _Knots, y: _Knots, a0: float, a1: float, b0: float, b1: float, closed: bool) -> float:
    return float(_segment_values(x, y, np.array([a0]), a1, np.array([b0]), b1, closed)[0])


def _values_norm(difference: np.ndarray) -> np.ndarray:
    return np.linalg.norm(difference, axis=1)


def _check_window(x: CadlagPath, y: CadlagPath, m: float) -> None:
    if not m > 0:
        raise ParameterError(f"Half-width m must be positive; got {m}.")
    for name, path in (("x", x), ("y", y)):
        if not path.covers(-m, m):
            raise DomainError(f"Path {name} on [{path.t_start}, {path.t_end}] does not cover [{-m}, {m}].")
    if x.dim != y.dim:
        raise DomainError(f"Paths have different dimensions ({x.dim} and {y.dim}).")


def _cost_on_knots(x: _Knots, y: _Knots, lam: TimeChange) -> float:
    points = lam.breakpoints
    worst = lam.log_slope_sup()
    last = points.shape[0] - 2
    for k in range(points.shape[0] - 1):
        (a0, b0), (a1, b1) = points[k], points[k + 1]
        worst = max(worst, _segment_value(x, y, a0, a1, b0, b1, closed=(k == last)))
    return worst


def time_change_cost(x: CadlagPath, y: CadlagPath, lam: TimeChange, m: float) -> float:
    """max(sup |log slope|, sup |x(t) - y(lam(t))|) over [-m, m], evaluated exactly."""
    if not math.isclose(lam.m, m):
        raise ParameterError(f"Time change maps [{-lam.m}, {lam.m}], not [{-m}, {m}].")
    _check_window(x, y, m)
    return _cost_on_knots(_Knots(x, m), _Knots(y, m), lam)


def _interior_jumps(path: CadlagPath, m: float) -> np.ndarray:
    taus = path.jump_times
    return taus[(taus > -m) & (taus < m)]


def _events(path: CadlagPath, m: float, cells: int) -> Tuple[np.ndarray, np.ndarray]:
    """Event times and a mask of anchors (endpoints and jumps)."""
    anchors = np.unique(np.concatenate([np.array([-m, m]), _interior_jumps(path, m)]))
    if not cells:
        return anchors, np.ones(anchors.size, dtype=bool)
    events = np.unique(np.concatenate([anchors, np.linspace(-m, m, cells + 1)]))
    return events, np.isin(events, anchors)


def _predecessors(
    i: int, j: int, window: int, anchors_x: np.ndarray, anchors_y: np.ndarray, linked: bool
) -> Tuple[np.ndarray, np.ndarray]:
    lo_i, lo_j = max(0, i - window), max(0, j - window)
    ips, jps = np.meshgrid(np.arange(lo_i, i), np.arange(lo_j, j), indexing="ij")
    ips, jps = ips.ravel(), jps.ravel()
    if not linked:
        return ips, jps
    far_i, far_j = np.meshgrid(anchors_x[anchors_x < i], anchors_y[anchors_y < j], indexing="ij")
    far_i, far_j = far_i.ravel(), far_j.ravel()
    outside = (far_i < lo_i) | (far_j < lo_j)
    return np.concatenate([ips, far_i[outside]]), np.concatenate([jps, far_j[outside]])


def _dp(
    x: _Knots,
    y: _Knots,
    events_x: Tuple[np.ndarray, np.ndarray],
    events_y: Tuple[np.ndarray, np.ndarray],
    m: float,
    bound: float,
) -> Tuple[float, TimeChange]:
    """
    Min-max DP over chains of event pairs (ex[i], ey[j]).

    cost[i, j] is the best max-cost of an increasing chain from (-m, -m) to
    (ex[i], ey[j]); each link costs max(|log slope|, segment value sup).
    Links span at most a few events, except between two anchor pairs, so
    that matched jumps can be joined directly. Candidate links are ranked by
    a cheap lower bound and evaluated in batches until none can win.
    """
    ex, mask_x = events_x
    ey, mask_y = events_y
    anchors_x, anchors_y = np.flatnonzero(mask_x), np.flatnonzero(mask_y)
    nx, ny = ex.size, ey.size
    window = max(nx, ny) if max(nx, ny) <= FULL_DP_EVENTS else SKIP_WINDOW
    spread = math.expm1(bound) if math.isfinite(bound) else math.inf
    cost = np.full((nx, ny), np.inf)
    back = np.full((nx, ny, 2), -1, dtype=int)
    cost[0, 0] = 0.0
    x_right, y_right = x.right(ex), y.right(ey)
    x_left, y_left = x.left_limit(ex), y.left_limit(ey)

    for i in range(1, nx):
        reach = spread * min(ex[i] + m, m - ex[i]) + BAND_SLACK
        for j in range(1, ny):
            if (i == nx - 1) != (j == ny - 1):
                continue
            if abs(ex[i] - ey[j]) > reach:
                continue
            closed = i == nx - 1
            end = float(np.linalg.norm(x_left[i] - y_left[j]))
            if end >= bound:
                continue
            ips, jps = _predecessors(i, j, window, anchors_x, anchors_y, bool(mask_x[i] and mask_y[j]))
            heads = cost[ips, jps]
            live = heads < bound
            if not live.any():
                continue
            ips, jps, heads = ips[live], jps[live], heads[live]
            slopes = np.abs(np.log((ey[j] - ey[jps]) / (ex[i] - ex[ips])))
            starts = _values_norm(x_right[ips] - y_right[jps])
            lower = np.maximum(np.maximum(heads, slopes), np.maximum(starts, end))
            order = np.argsort(lower, kind="stable")
            order = order[lower[order] < bound]

            best = bound
            arg = None
            for first in range(0, order.size, LINK_BATCH):
                batch = order[first : first + LINK_BATCH]
                batch = batch[lower[batch] < best]
                if not batch.size:
                    break
                values = _segment_values(x, y, ex[ips[batch]], ex[i], ey[jps[batch]], ey[j], closed)
                links = np.maximum(lower[batch], values)
                k = int(np.argmin(links))
                if links[k] < best:
                    best, arg = float(links[k]), (int(ips[batch[k]]), int(jps[batch[k]]))
            if arg is not None:
                cost[i, j] = best
                back[i, j] = arg

    final = cost[nx - 1, ny - 1]
    if not np.isfinite(final):
        return math.inf, TimeChange.identity(m)
    chain = [(nx - 1, ny - 1)]
    while chain[-1] != (0, 0):
        i, j = chain[-1]
        chain.append(tuple(back[i, j]))
    points = np.array([(ex[i], ey[j]) for i, j in reversed(chain)])
    return float(final), TimeChange(points, m)


def skorohod_oracle_small(x: CadlagPath, y: CadlagPath, m: float) -> float:
    """
    Minimum time-change cost over every monotone matching of interior jumps,
    each realized by the piecewise-affine change through the matched pairs.
    """
    _check_window(x, y, m)
    xk, yk = _Knots(x, m), _Knots(y, m)
    for name, path in (("x", x), ("y", y)):
        if not path.restrict(-m, m).is_piecewise_constant():
            raise OracleCapacityError(f"Oracle needs piecewise-constant paths; {name} is not.")
    jx, jy = _interior_jumps(x, m), _interior_jumps(y, m)
    if jx.size > ORACLE_MAX_JUMPS or jy.size > ORACLE_MAX_JUMPS:
        raise OracleCapacityError(
            f"Oracle handles at most {ORACLE_MAX_JUMPS} jumps per path; got {jx.size} and {jy.size}."
        )
    best = math.inf
    for k in range(min(jx.size, jy.size) + 1):
        for xs in itertools.combinations(jx, k):
            for ys in itertools.combinations(jy, k):
                points = np.array([(-m, -m), *zip(xs, ys), (m, m)])
                best = min(best, _cost_on_knots(xk, yk, TimeChange(points, m)))
    return best


def _oracle_eligible(x: CadlagPath, y: CadlagPath, m: float) -> bool:
    for path in (x, y):
        if not path.restrict(-m, m).is_piecewise_constant():
            return False
        if _interior_jumps(path, m).size > ORACLE_MAX_JUMPS:
            return False
    return True


def skorohod_bounded(
    x: CadlagPath,
    y: CadlagPath,
    m: float,
    tol: Optional[float] = None,
    *,
    cap: Optional[float] = None,
) -> MetricResult:
    """
    Upper estimate of d_m(x, y) from the event-chain DP.

    Step paths need no refinement: their events are the jumps themselves.
    Otherwise the uniform part of the event grid is doubled until two
    estimates agree to ``tol``. With ``cap`` the search ignores time changes
    costing cap or more, so any value at or above cap only means "at least cap".
    """
    tol = float(get_setting("LEVY_SYNC_SKOROHOD_TOL")) if tol is None else float(tol)
    if not tol > 0:
        raise ParameterError(f"tol must be positive; got {tol}.")
    _check_window(x, y, m)
    xk, yk = _Knots(x, m), _Knots(y, m)
    identity = TimeChange.identity(m)
    upper = _cost_on_knots(xk, yk, identity)
    if upper == 0.0:
        return MetricResult(value=0.0, witness=identity, certified_gap=0.0)

    stepwise = x.restrict(-m, m).is_piecewise_constant() and y.restrict(-m, m).is_piecewise_constant()
    max_cells = int(get_setting("LEVY_SYNC_SKOROHOD_MAX_REFINEMENT"))
    schedule = [0] if stepwise else _cell_schedule(max_cells)

    best_value, best_witness = upper, identity
    history: List[Tuple[int, float]] = []
    gap = math.inf
    for cells in schedule:
        bound = best_value if cap is None else min(best_value, cap)
        value, witness = _dp(xk, yk, _events(x, m, cells), _events(y, m, cells), m, bound)
        if value < best_value:
            best_value, best_witness = value, witness
        if history:
            gap = abs(history[-1][1] - best_value)
        history.append((cells, best_value))
        if gap < tol:
            break
    else:
        if not stepwise:
            logger.warning("Skorohod refinement stopped at %d cells with change %.3g (tol %.3g)", schedule[-1], gap, tol)

    if stepwise:
        gap = 0.0
    if _oracle_eligible(x, y, m):
        ceiling = math.inf if cap is None else float(cap)
        reference = skorohod_oracle_small(x, y, m)
        gap = max(0.0, min(best_value, ceiling) - min(reference, ceiling))
    return MetricResult(
        value=float(best_value),
        witness=best_witness,
        certified_gap=float(gap),
        refinements=tuple(history),
    )


def _cell_schedule(max_cells: int) -> List[int]:
    schedule = []
    cells = INITIAL_CELLS
    while cells < max_cells:
        schedule.append(cells)
        cells *= 2
    schedule.append(max(max_cells, INITIAL_CELLS))
    return schedule


def tent_weight(t, m: int) -> np.ndarray:
    """g_m: 1 on |t| <= m - 1, m - |t| on m - 1 <= |t| <= m, 0 beyond."""
    return np.clip(m - np.abs(np.asarray(t, dtype=float)), 0.0, 1.0)


def weighted_path(x: CadlagPath, m: int) -> CadlagPath:
    window = x.restrict(-m, m)
    kinks = np.array([-m, -(m - 1), 0.0, m - 1, m], dtype=float)
    pieces = [window.times, kinks[(kinks >= -m) & (kinks <= m)]]
    for lo, hi in ((-m, 1 - m), (m - 1, m)):
        # Products of the ramp with a sloped segment are quadratic.
        if not window.restrict(lo, hi).is_piecewise_constant():
            pieces.append(np.linspace(lo, hi, WEIGHT_SAMPLES_PER_UNIT + 1))
    times = np.unique(np.concatenate(pieces))
    weights = tent_weight(times, m)[:, None]
    values = window.eval_many(times) * weights
    left = np.vstack([values[:1], window.left_limit_many(times[1:]) * weights[1:]])
    return CadlagPath(times, values, left)


def skorohod_global(
    x: CadlagPath,
    y: CadlagPath,
    M_max: Optional[int] = None,
    tol: Optional[float] = None,
) -> GlobalMetric:
    """Truncated sum over m of 2^-m (1 ^ d_m(g_m x, g_m y)); the tail 2^-M_max joins the uncertainty."""
    M_max = int(get_setting("LEVY_SYNC_SKOROHOD_M_MAX")) if M_max is None else int(M_max)
    if M_max < 1:
        raise ParameterError(f"M_max must be at least 1; got {M_max}.")
    terms = []
    uncertainty = 2.0**-M_max
    for m in range(1, M_max + 1):
        result = skorohod_bounded(weighted_path(x, m), weighted_path(y, m), float(m), tol, cap=1.0)
        terms.append(2.0**-m * min(1.0, result.value))
        uncertainty += 2.0**-m * result.certified_gap
    return GlobalMetric(value=float(sum(terms)), uncertainty=float(uncertainty), terms=tuple(terms))


__all__ = [
    "GlobalMetric",
    "MetricResult",
    "TimeChange",
    "skorohod_bounded",
    "skorohod_global",
    "skorohod_oracle_small",
    "tent_weight",
    "time_change_cost",
    "weighted_path",
]

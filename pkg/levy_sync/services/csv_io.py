from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

import numpy as np

from ..exceptions import ConfigError
from .cadlag_path import CadlagPath

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _fmt(value: float) -> str:
    # repr gives the shortest string that parses back to the same double.
    return repr(float(value))


def _value_columns(dim: int, prefix: str = "value") -> List[str]:
    if dim == 1:
        return [prefix]
    return [f"{prefix}_{i}" for i in range(dim)]


def write_path_csv(path: CadlagPath, destination: PathLike) -> Path:
    """
    Knot table ``t,value[_i...],is_jump``.

    A jump knot takes two rows at the same t: first the left limit with
    is_jump=0, then the right value with is_jump=1.
    """
    destination = Path(destination)
    destination.parent.mkdir(parents=True, exist_ok=True)
    with destination.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["t", *_value_columns(path.dim), "is_jump"])
        mask = path.jump_mask
        for k, t in enumerate(path.times):
            if mask[k]:
                writer.writerow([_fmt(t), *map(_fmt, path.left_values[k]), 0])
            writer.writerow([_fmt(t), *map(_fmt, path.values[k]), int(mask[k])])
    logger.debug("Wrote %d knots to %s", path.times.size, destination)
    return destination


def _parse_float(raw: str, field: str, line: int) -> float:
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"Field '{field}' is not a number: {raw!r}.", field=field, line=line)


def read_path_csv(source: PathLike) -> CadlagPath:
    source = Path(source)
    with source.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if not header or header[0] != "t" or header[-1] != "is_jump" or len(header) < 3:
            raise ConfigError(f"{source}: expected header 't,value...,is_jump'.", field="header", line=1)
        value_names = header[1:-1]
        times: List[float] = []
        values: List[List[float]] = []
        left: List[List[float]] = []
        pending_left = None
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ConfigError(f"{source}: expected {len(header)} columns, got {len(row)}.", line=line)
            t = _parse_float(row[0], "t", line)
            point = [_parse_float(raw, name, line) for raw, name in zip(row[1:-1], value_names)]
            flag = row[-1].strip()
            if flag not in ("0", "1"):
                raise ConfigError(f"Field 'is_jump' must be 0 or 1; got {flag!r}.", field="is_jump", line=line)
            if flag == "1":
                if pending_left is None or pending_left[0] != t:
                    raise ConfigError(
                        "Field 'is_jump' row must follow its left-limit row at the same t.", field="is_jump", line=line
                    )
                times.append(t)
                left.append(pending_left[1])
                values.append(point)
                pending_left = None
                continue
            if pending_left is not None:
                times.append(pending_left[0])
                left.append(pending_left[1])
                values.append(pending_left[1])
            pending_left = (t, point)
        if pending_left is not None:
            times.append(pending_left[0])
            left.append(pending_left[1])
            values.append(pending_left[1])
    if len(times) < 2:
        raise ConfigError(f"{source}: a path needs at least two knots.", field="t")
    return CadlagPath(times, values, left)


def write_jump_table(path: CadlagPath, destination: PathLike) -> Path:
    destination = Path(destination)
    destination.parent.mkdir(parents=True, exist_ok=True)
    with destination.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["t_jump", *_value_columns(path.dim, "size")])
        for t, size in zip(path.jump_times, path.jump_sizes):
            writer.writerow([_fmt(t), *map(_fmt, size)])
    return destination


def write_rows_csv(rows: Iterable[Dict[str, Any]], columns: Sequence[str], destination: PathLike) -> Path:
    destination = Path(destination)
    destination.parent.mkdir(parents=True, exist_ok=True)
    with destination.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _fmt(value) if isinstance(value, float) else value for key, value in row.items()})
    return destination


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def write_sidecar(metadata: Dict[str, Any], destination: PathLike) -> Path:
    destination = Path(destination)
    destination.parent.mkdir(parents=True, exist_ok=True)
    destination.write_text(json.dumps(_jsonable(metadata), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return destination


def read_sidecar(source: PathLike) -> Dict[str, Any]:
    try:
        return json.loads(Path(source).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: invalid JSON sidecar ({exc}).", line=exc.lineno)


__all__ = [
    "read_path_csv",
    "read_sidecar",
    "write_jump_table",
    "write_path_csv",
    "write_rows_csv",
    "write_sidecar",
]

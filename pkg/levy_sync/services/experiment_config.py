from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from ..conf import get_setting
from ..exceptions import ConfigError, LevySyncError
from .levy_process import GeneratingTriplet
from .registry import PRESETS, DriftFunction, build_drift, build_noise

EXPERIMENT_KINDS = ("sample", "integrate", "stationary", "metric", "sweep")

_DRIFT_PATTERN = re.compile(r"^\s*([A-Za-z_][\w-]*)\s*(?:\((.*)\))?\s*$")
_SECTION_PATTERN = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_PATTERN = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")
_NOISE_TEXT_KEYS = {"family", "distribution"}
_NOISE_LIST_KEYS = {"distribution_params"}
_NOISE_INT_KEYS = {"dim"}


@dataclass(frozen=True)
class DriftSpec:
    name: str
    params: Tuple[float, ...] = ()

    def build(self) -> DriftFunction:
        return build_drift(self.name, self.params)

    @property
    def label(self) -> str:
        return f"{self.name}({', '.join(repr(p) for p in self.params)})"


@dataclass(frozen=True)
class NoiseSpec:
    family: str
    params: Tuple[Tuple[str, object], ...] = ()

    def triplet(self) -> GeneratingTriplet:
        return build_noise(self.family, **dict(self.params))

    def describe(self) -> Dict[str, str]:
        payload = {"family": self.family}
        for key, value in self.params:
            if isinstance(value, tuple):
                payload[key] = ", ".join(repr(v) for v in value)
            else:
                payload[key] = value if isinstance(value, str) else repr(value)
        return payload


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    name: str
    seeds: Tuple[int, ...]
    t_start: float
    t_end: float
    dt: float
    output_root: str
    workers: int
    source: Optional[Path] = None
    f: Optional[DriftSpec] = None
    g: Optional[DriftSpec] = None
    alpha: float = 1.0
    beta: float = 1.0
    dim: int = 1
    y0: Tuple[float, ...] = (0.0,)
    noise1: Optional[NoiseSpec] = None
    noise2: Optional[NoiseSpec] = None
    same_noise: bool = False
    lambda_values: Tuple[float, ...] = ()
    rate: Optional[float] = None
    horizons: Optional[Tuple[float, ...]] = None
    path_a: Optional[str] = None
    path_b: Optional[str] = None
    m: Optional[float] = None
    m_max: Optional[int] = None
    tol: Optional[float] = None
    witness: bool = False

    @property
    def window(self) -> Tuple[float, float]:
        return (self.t_start, self.t_end)

    def resolve_path(self, value: str) -> Path:
        path = Path(value)
        if path.is_absolute() or self.source is None:
            return path
        return self.source.parent / path

    def resolved(self) -> Dict[str, Dict[str, str]]:
        """Every value that affects the output, defaults included."""
        sections: Dict[str, Dict[str, str]] = {
            "experiment": {
                "kind": self.kind,
                "name": self.name,
                "seeds": ", ".join(str(s) for s in self.seeds),
                "workers": str(self.workers),
            },
            "grid": {"t_start": repr(self.t_start), "t_end": repr(self.t_end), "dt": repr(self.dt)},
        }
        system = {"alpha": repr(self.alpha), "beta": repr(self.beta), "dim": str(self.dim)}
        if self.f is not None:
            system["f"] = self.f.label
        if self.g is not None:
            system["g"] = self.g.label
        system["y0"] = ", ".join(repr(v) for v in self.y0)
        sections["system"] = system
        if self.noise1 is not None:
            sections["noise1"] = self.noise1.describe()
        if self.noise2 is not None:
            sections["noise2"] = self.noise2.describe()
        if self.kind == "sweep":
            sections["sweep"] = {
                "lambda_values": ", ".join(repr(v) for v in self.lambda_values),
                "same_noise": "yes" if self.same_noise else "no",
                "m_max": str(self._m_max()),
                "tol": repr(self._tol()),
            }
        if self.kind == "stationary":
            sections["stationary"] = {
                "lambda": "pullback" if self.rate is None else repr(self.rate),
                "horizons": "auto" if self.horizons is None else ", ".join(repr(h) for h in self.horizons),
            }
        if self.kind == "metric":
            sections["metric"] = {
                "path_a": str(self.path_a),
                "path_b": str(self.path_b),
                "m": "global" if self.m is None else repr(self.m),
                "m_max": str(self._m_max()),
                "tol": repr(self._tol()),
                "witness": "yes" if self.witness else "no",
            }
        return sections

    def _tol(self) -> float:
        return float(get_setting("LEVY_SYNC_SKOROHOD_TOL")) if self.tol is None else self.tol

    def _m_max(self) -> int:
        return int(get_setting("LEVY_SYNC_SKOROHOD_M_MAX")) if self.m_max is None else self.m_max


@dataclass
class _Source:
    parser: configparser.ConfigParser
    lines: Dict[Tuple[str, str], int] = field(default_factory=dict)

    def line(self, section: str, key: Optional[str] = None) -> Optional[int]:
        return self.lines.get((section, key or ""))

    def error(self, section: str, key: str, message: str) -> ConfigError:
        return ConfigError(f"[{section}] {message}", field=key, line=self.line(section, key))

    def has(self, section: str, key: str) -> bool:
        return self.parser.has_option(section, key)

    def text(self, section: str, key: str, default: Optional[str] = None) -> Optional[str]:
        if not self.has(section, key):
            return default
        value = self.parser.get(section, key).strip()
        return value if value else default

    def required(self, section: str, key: str) -> str:
        value = self.text(section, key)
        if value is None:
            raise ConfigError(f"Field '{key}' is required in [{section}].", field=key, line=self.line(section))
        return value

    def number(self, section: str, key: str, default: Optional[float] = None) -> Optional[float]:
        raw = self.text(section, key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise self.error(section, key, f"Field '{key}' must be a number; got {raw!r}.")

    def integer(self, section: str, key: str, default: Optional[int] = None) -> Optional[int]:
        raw = self.text(section, key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise self.error(section, key, f"Field '{key}' must be an integer; got {raw!r}.")

    def numbers(self, section: str, key: str) -> Optional[Tuple[float, ...]]:
        raw = self.text(section, key)
        if raw is None:
            return None
        try:
            return tuple(float(item) for item in _split_list(raw))
        except ValueError:
            raise self.error(section, key, f"Field '{key}' must be a comma-separated list of numbers; got {raw!r}.")

    def flag(self, section: str, key: str, default: bool = False) -> bool:
        if self.text(section, key) is None:
            return default
        try:
            return self.parser.getboolean(section, key)
        except ValueError:
            raise self.error(section, key, f"Field '{key}' must be yes/no.")


def _split_list(raw: str) -> List[str]:
    return [item.strip() for item in raw.split(",") if item.strip()]


def _index_lines(text: str) -> Dict[Tuple[str, str], int]:
    lines: Dict[Tuple[str, str], int] = {}
    section = ""
    for number, line in enumerate(text.splitlines(), start=1):
        header = _SECTION_PATTERN.match(line)
        if header:
            section = header.group(1).strip()
            lines[(section, "")] = number
            continue
        key = _KEY_PATTERN.match(line)
        if key and section:
            lines[(section, key.group(1).strip().lower())] = number
    return lines


def _parse_text(text: str) -> _Source:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("Config must start with a [section] header.", line=exc.lineno)
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as exc:
        raise ConfigError(str(exc).splitlines()[0], field=getattr(exc, "option", None), line=exc.lineno)
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError(f"Cannot parse line {line}: expected 'key = value'.", line=line)
    return _Source(parser, _index_lines(text))


def parse_drift(raw: str) -> DriftSpec:
    match = _DRIFT_PATTERN.match(raw)
    if not match:
        raise ValueError(f"cannot read drift {raw!r}; expected name(p1, p2, ...)")
    name, args = match.group(1), match.group(2)
    params = tuple(float(item) for item in _split_list(args)) if args else ()
    return DriftSpec(name, params)


def _drift(source: _Source, key: str) -> Optional[DriftSpec]:
    raw = source.text("system", key)
    if raw is None:
        return None
    try:
        spec = parse_drift(raw)
        spec.build()
    except (ValueError, LevySyncError) as exc:
        raise source.error("system", key, f"Field '{key}': {exc}")
    return spec


def _noise(source: _Source, section: str) -> Optional[NoiseSpec]:
    if not source.parser.has_section(section):
        return None
    family = source.required(section, "family")
    params = []
    for key in source.parser.options(section):
        if key == "family":
            continue
        raw = source.text(section, key)
        if raw is None:
            continue
        if key in _NOISE_TEXT_KEYS:
            value: object = raw
        elif key in _NOISE_LIST_KEYS:
            value = source.numbers(section, key)
        elif key in _NOISE_INT_KEYS:
            value = source.integer(section, key)
        else:
            value = source.number(section, key)
        params.append((key, value))
    spec = NoiseSpec(family, tuple(sorted(params)))
    try:
        spec.triplet()
    except LevySyncError as exc:
        raise source.error(section, "family", f"Noise [{section}]: {exc}")
    return spec


def _validate(config: ExperimentConfig, source: _Source) -> None:
    if not config.seeds:
        raise source.error("experiment", "seeds", "Field 'seeds' must not be empty.")
    if not config.dt > 0:
        raise source.error("grid", "dt", f"Field 'dt' must be positive; got {config.dt}.")
    if not config.t_end > config.t_start:
        raise source.error("grid", "t_end", "Field 't_end' must exceed 't_start'.")
    if config.workers < 1:
        raise source.error("experiment", "workers", "Field 'workers' must be at least 1.")
    kind = config.kind
    if kind in ("sample", "stationary") and config.noise1 is None:
        raise ConfigError(f"Experiment '{kind}' needs a [noise] section.", field="noise")
    if kind == "integrate" and config.f is None:
        raise ConfigError("Experiment 'integrate' needs [system] f.", field="f")
    if kind == "stationary" and config.rate is None and config.f is None:
        raise ConfigError("Experiment 'stationary' needs [stationary] lambda or [system] f.", field="lambda")
    if kind == "stationary" and config.rate is not None and not config.rate > 0:
        raise source.error("stationary", "lambda", "Field 'lambda' must be positive.")
    if kind == "metric":
        if config.path_a is None or config.path_b is None:
            raise ConfigError("Experiment 'metric' needs [metric] path_a and path_b.", field="path_a")
        if config.m is not None and not config.m > 0:
            raise source.error("metric", "m", "Field 'm' must be positive.")
    if kind == "sweep":
        if config.f is None or config.g is None:
            raise ConfigError("Experiment 'sweep' needs [system] f and g or a preset.", field="f")
        values = config.lambda_values
        if not values:
            raise ConfigError("Field 'lambda_values' is required in [sweep].", field="lambda_values")
        if any(v <= 0 for v in values):
            raise source.error(
                "sweep", "lambda_values", "Field 'lambda_values' must be positive; the absorption radius needs lambda > 0."
            )
        if any(b <= a for a, b in zip(values, values[1:])):
            raise source.error("sweep", "lambda_values", "Field 'lambda_values' must be ascending.")
    if config.m_max is not None and config.m_max < 1:
        section = "metric" if kind == "metric" else "sweep"
        raise source.error(section, "m_max", "Field 'm_max' must be at least 1.")
    if config.tol is not None and not config.tol > 0:
        section = "metric" if kind == "metric" else "sweep"
        raise source.error(section, "tol", "Field 'tol' must be positive.")


def parse_config(text: str, *, source: Optional[Path] = None) -> ExperimentConfig:
    """Parse and validate an experiment config; every failure is a ConfigError."""
    parsed = _parse_text(text)
    if not parsed.parser.has_section("experiment"):
        raise ConfigError("Missing [experiment] section.", field="experiment")
    kind = parsed.required("experiment", "kind")
    if kind not in EXPERIMENT_KINDS:
        raise parsed.error("experiment", "kind", f"Field 'kind' must be one of {', '.join(EXPERIMENT_KINDS)}; got {kind!r}.")
    seed_values = parsed.numbers("experiment", "seeds") or (0.0,)
    if any(s != int(s) or s < 0 for s in seed_values):
        raise parsed.error("experiment", "seeds", "Field 'seeds' must hold non-negative integers.")

    f = _drift(parsed, "f")
    g = _drift(parsed, "g")
    alpha = parsed.number("system", "alpha", 1.0)
    beta = parsed.number("system", "beta", 1.0)
    preset_name = parsed.text("system", "preset")
    if preset_name is not None:
        preset = PRESETS.get(preset_name)
        if preset is None:
            raise parsed.error("system", "preset", f"Unknown preset {preset_name!r}; known: {', '.join(sorted(PRESETS))}.")
        f = f or DriftSpec(*preset.f)
        g = g or DriftSpec(*preset.g)
        if not parsed.has("system", "alpha"):
            alpha = preset.alpha
        if not parsed.has("system", "beta"):
            beta = preset.beta

    dim = parsed.integer("system", "dim", 1)
    y0 = parsed.numbers("system", "y0") or (0.0,) * dim
    noise1 = _noise(parsed, "noise") or _noise(parsed, "noise1")
    metric_section = "metric" if kind == "metric" else "sweep"
    default_name = source.stem if source is not None else kind

    config = ExperimentConfig(
        kind=kind,
        name=parsed.text("experiment", "name", default_name),
        seeds=tuple(int(s) for s in seed_values),
        t_start=parsed.number("grid", "t_start", 0.0),
        t_end=parsed.number("grid", "t_end", 1.0),
        dt=parsed.number("grid", "dt", float(get_setting("LEVY_SYNC_DEFAULT_DT"))),
        output_root=parsed.text("experiment", "output", str(get_setting("LEVY_SYNC_OUTPUT_ROOT"))),
        workers=parsed.integer("experiment", "workers", int(get_setting("LEVY_SYNC_WORKERS"))),
        source=source,
        f=f,
        g=g,
        alpha=alpha,
        beta=beta,
        dim=dim,
        y0=y0,
        noise1=noise1,
        noise2=_noise(parsed, "noise2"),
        same_noise=parsed.flag("sweep", "same_noise"),
        lambda_values=parsed.numbers("sweep", "lambda_values") or (),
        rate=parsed.number("stationary", "lambda"),
        horizons=parsed.numbers("stationary", "horizons"),
        path_a=parsed.text("metric", "path_a"),
        path_b=parsed.text("metric", "path_b"),
        m=parsed.number("metric", "m"),
        m_max=parsed.integer(metric_section, "m_max"),
        tol=parsed.number(metric_section, "tol"),
        witness=parsed.flag("metric", "witness"),
    )
    if len(config.y0) != config.dim:
        raise parsed.error("system", "y0", f"Field 'y0' must have {config.dim} entries.")
    _validate(config, parsed)
    return config


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"Cannot read config {path}: {exc.strerror}.", field="config")
    return parse_config(text, source=path)


__all__ = [
    "DriftSpec",
    "EXPERIMENT_KINDS",
    "ExperimentConfig",
    "NoiseSpec",
    "load_config",
    "parse_config",
    "parse_drift",
]

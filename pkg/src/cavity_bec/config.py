"""Run configuration: JSON parsing, dotted overrides and validation."""

from __future__ import annotations

import copy
import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .analysis import PhysicalParams, SweepPlan
from .dynamics import IntegratorConfig
from .fockspace import TruncationSpec
from .model import ModelParams

MODES = ("simulate", "oracle", "sweep", "qdist", "estimate")
OUTPUT_DIR_ENV = "CAVITY_BEC_OUTPUT_DIR"


class ConfigError(ValueError):
    """Invalid configuration; ``location`` is the dotted path of the offending field."""

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


@dataclass(frozen=True)
class SimulateOptions:
    omega_t_final: float = math.pi / 2
    n_records: int = 400  # approximate number of recorded points
    record_every: int | None = None  # steps between records; overrides n_records
    fit_oracle: bool = True
    fit_bounds: tuple[float, float] = (0.5, 2.0)
    include_squeezing: bool = False


@dataclass(frozen=True)
class OracleOptions:
    omega_t_max: float = math.pi
    points: int = 401
    include_squeezing: bool = False


@dataclass(frozen=True)
class QdistOptions:
    omega_t: float | None = None  # defaults to 1/sqrt(2N)
    source: str = "oracle"
    include_squeezing: bool = False
    rotation: bool = False
    resolution_theta: int = 64
    resolution_phi: int = 128


# section name -> dataclass built from it
_SECTIONS = {
    "model": ModelParams,
    "truncation": TruncationSpec,
    "integrator": IntegratorConfig,
    "simulate": SimulateOptions,
    "oracle": OracleOptions,
    "qdist": QdistOptions,
    "sweep": SweepPlan,
    "estimate": PhysicalParams,
}
_TOP_KEYS = {"mode", "output_dir", *_SECTIONS}
_REQUIRED = {
    "simulate": ("truncation",),
    "oracle": ("truncation",),
    "qdist": ("truncation",),
    "sweep": ("sweep",),
    "estimate": (),
}


@dataclass(frozen=True)
class RunConfig:
    mode: str
    model: ModelParams = field(default_factory=ModelParams)
    truncation: TruncationSpec | None = None
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    output_dir: str = "output"
    simulate: SimulateOptions = field(default_factory=SimulateOptions)
    oracle: OracleOptions = field(default_factory=OracleOptions)
    qdist: QdistOptions = field(default_factory=QdistOptions)
    sweep: SweepPlan | None = None
    estimate: PhysicalParams = field(default_factory=PhysicalParams)

    @property
    def N(self) -> int:
        return self.truncation.N

    def to_dict(self) -> dict:
        """Resolved configuration as plain JSON data; re-parses to an equal config."""
        out: dict[str, Any] = {"mode": self.mode, "output_dir": self.output_dir}
        for name in _SECTIONS:
            value = getattr(self, name)
            if value is not None:
                out[name] = _plain(dataclasses.asdict(value))
        return out


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def load_json(path) -> dict:
    """Read a JSON object; syntax errors report line and column."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc.strerror}", str(path)) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}", str(path)) from exc
    if not isinstance(data, dict):
        raise ConfigError("top level must be a JSON object", str(path))
    return data


def parse_value(text: str):
    """Interpret an override value as JSON, falling back to a bare string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: dict, overrides) -> dict:
    """Apply ``key.path=value`` assignments to a copy of ``data``."""
    data = copy.deepcopy(data)
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not of the form key.path=value", "--set")
        parts = key.split(".")
        node = data
        for depth, part in enumerate(parts[:-1]):
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError("cannot set a field inside a non-object value", ".".join(parts[: depth + 1]))
            node = child
        node[parts[-1]] = parse_value(raw)
    return data


def _build(cls, raw, location: str):
    if not isinstance(raw, dict):
        raise ConfigError("expected an object", location)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in raw:
        if key not in names:
            raise ConfigError(f"unknown key (allowed: {', '.join(sorted(names))})", f"{location}.{key}")
    kwargs = dict(raw)
    if cls is SweepPlan and "integrator" in kwargs:
        kwargs["integrator"] = _build(IntegratorConfig, kwargs["integrator"], f"{location}.integrator")
    for key in ("N_values", "fit_bounds"):
        if isinstance(kwargs.get(key), list):
            kwargs[key] = tuple(kwargs[key])
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), _field_location(location, str(exc), names)) from exc


def _field_location(location: str, message: str, names) -> str:
    # point at the field the constructor complained about, when it is identifiable
    head = message.split()[0] if message else ""
    return f"{location}.{head}" if head in names else location


def build_config(data: dict, mode: str | None = None, output_dir: str | None = None) -> RunConfig:
    """Validate plain data into a :class:`RunConfig`.

    ``mode`` overrides the file's ``mode``. The output directory is taken from
    ``output_dir``, then the ``CAVITY_BEC_OUTPUT_DIR`` environment variable,
    then the file.
    """
    for key in data:
        if key not in _TOP_KEYS:
            raise ConfigError(f"unknown key (allowed: {', '.join(sorted(_TOP_KEYS))})", key)
    mode = mode or data.get("mode")
    if mode is None:
        raise ConfigError("no mode given", "mode")
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; expected one of {MODES}", "mode")
    for section in _REQUIRED[mode]:
        if section not in data:
            raise ConfigError(f"section required in {mode} mode", section)
    kwargs: dict[str, Any] = {"mode": mode}
    for name, cls in _SECTIONS.items():
        if name in data:
            kwargs[name] = _build(cls, data[name], name)
    out = output_dir or os.environ.get(OUTPUT_DIR_ENV) or data.get("output_dir", "output")
    if not isinstance(out, str) or not out:
        raise ConfigError("must be a non-empty string", "output_dir")
    kwargs["output_dir"] = out
    cfg = RunConfig(**kwargs)
    _check(cfg)
    return cfg


def _check(cfg: RunConfig) -> None:
    q = cfg.qdist
    if q.source not in ("oracle", "simulate"):
        raise ConfigError(f"unknown source {q.source!r}; expected 'oracle' or 'simulate'", "qdist.source")
    if q.resolution_theta < 2 or q.resolution_phi < 2:
        raise ConfigError("grid resolutions must be >= 2", "qdist.resolution_theta")
    if q.omega_t is not None and q.omega_t < 0:
        raise ConfigError("must be non-negative", "qdist.omega_t")
    s = cfg.simulate
    if not s.omega_t_final > 0:
        raise ConfigError("must be positive", "simulate.omega_t_final")
    if s.record_every is not None and s.record_every < 1:
        raise ConfigError("must be >= 1", "simulate.record_every")
    if s.n_records < 1:
        raise ConfigError("must be >= 1", "simulate.n_records")
    lo, hi = s.fit_bounds
    if not 0 < lo < hi:
        raise ConfigError("must satisfy 0 < lower < upper", "simulate.fit_bounds")
    o = cfg.oracle
    if o.points < 2:
        raise ConfigError("must be >= 2", "oracle.points")
    if not o.omega_t_max > 0:
        raise ConfigError("must be positive", "oracle.omega_t_max")


def parse_config(path, overrides=(), mode: str | None = None, output_dir: str | None = None) -> RunConfig:
    """Load, override and validate a JSON config file."""
    data = load_json(path) if path is not None else {}
    return build_config(apply_overrides(data, overrides), mode=mode, output_dir=output_dir)

"""
Run configuration: a pydantic model plus the `key: value` text format

Entries are separated by newlines or top-level commas, `#` starts a comment
and vectors and matrices are JSON-style bracketed lists, which may span lines:

    builtin: rotation, omega: 6.283185307
    fiber: sphere
    resolution: 64
"""

import hashlib
import json
import os
from typing import Dict, Iterator, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from app.errors import ConfigError
from app.fibers import EpsilonField, FiberSpace, default_fiber_kind, make_fiber
from app.models import THEOREM_IDS, PeriodicSystem
from app.systems import get_builtin, normalize_period, system_from_definition

COMMANDS = ("integrate", "monodromy", "chain-graph", "verify", "lift-demo", "project-demo")
BUILTIN_PARAMS = ("omega", "lambda", "a", "q")
# fields that never change an emitted byte
UNHASHED_FIELDS = {"output_dir", "workers"}


def _default_workers() -> int:
    try:
        return max(1, int(os.getenv("FLOQUET_WORKERS", "1")))
    except ValueError:
        return 1


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    command: str = "monodromy"
    theorem: str = "all"

    # system source: a builtin name or an explicit definition
    builtin: Optional[str] = None
    params: Dict[str, float] = Field(default_factory=dict)
    kind: Optional[str] = None
    name: Optional[str] = None
    dimension: Optional[int] = None
    period: float = Field(default=1.0, gt=0)
    A0: Optional[list] = None
    Ak: Optional[list] = None
    Bk: Optional[list] = None

    steps: int = 1024
    fiber: Optional[str] = None
    radius: float = Field(default=1.0, gt=0)
    resolution: int = Field(default=64, ge=2)
    base_resolution: Optional[int] = Field(default=None, ge=2)
    epsilon: float = Field(default=1e-2, gt=0)
    epsilon_slope: float = Field(default=0.0, ge=0)
    samples_per_box: int = Field(default=5, ge=1)
    include_corners: bool = True
    seed: int = 42
    output_dir: str = "output"

    slack: float = Field(default=0.02, ge=0)
    n_min: int = Field(default=1, ge=1)
    iterations: int = Field(default=200, ge=2)
    horizon: int = Field(default=64, ge=1)
    return_horizon: int = Field(default=5000, ge=1)
    recurrence_tol: float = Field(default=1e-9, gt=0)
    check_points: int = Field(default=8, ge=1)
    base_points: int = Field(default=8, ge=1)
    grid_size: int = Field(default=16, ge=16)
    workers: int = Field(default_factory=_default_workers, ge=1)

    initial_state: Optional[List[float]] = None
    t_end: float = 1.0
    u: float = Field(default=0.25, ge=0, lt=1)
    v: float = Field(default=0.75, ge=0, lt=1)
    chain_steps: int = Field(default=4, ge=1)

    @field_validator("command")
    @classmethod
    def known_command(cls, value):
        if value not in COMMANDS:
            raise ValueError(f"must be one of {', '.join(COMMANDS)}")
        return value

    @field_validator("theorem")
    @classmethod
    def known_theorem(cls, value):
        if value != "all" and value not in THEOREM_IDS:
            raise ValueError(f"must be 'all' or one of {', '.join(THEOREM_IDS)}")
        return value

    @field_validator("steps")
    @classmethod
    def power_of_two(cls, value):
        if value < 16 or value & (value - 1):
            raise ValueError("must be a power of two >= 16")
        return value

    @property
    def resolved_base_resolution(self) -> int:
        return self.base_resolution or self.resolution

    @property
    def theorems(self) -> List[str]:
        return list(THEOREM_IDS) if self.theorem == "all" else [self.theorem]

    def build_system(self) -> PeriodicSystem:
        if self.builtin is not None:
            system = get_builtin(self.builtin, self.params)
        elif self.kind == "builtin" or (self.A0 is None and self.name is not None):
            if self.name is None:
                raise ConfigError("builtin systems need a name", field="name")
            system = get_builtin(self.name, self.params)
        elif self.A0 is not None:
            dimension = self.dimension if self.dimension is not None else len(self.A0)
            definition = {"kind": self.kind or ("trig" if self.Ak or self.Bk else "constant"),
                          "dimension": dimension, "period": self.period,
                          "A0": self.A0, "Ak": self.Ak, "Bk": self.Bk, "name": self.name or "custom"}
            system = system_from_definition(definition)
        else:
            raise ConfigError("no system given: set 'builtin' or a definition with 'A0'", field="builtin")
        return normalize_period(system)

    def build_fiber(self, dimension: int) -> FiberSpace:
        return make_fiber(self.fiber or default_fiber_kind(dimension), dimension, self.radius)

    def epsilon_field(self) -> EpsilonField:
        return EpsilonField(self.epsilon, self.epsilon_slope)

    def config_hash(self) -> str:
        payload = json.dumps(self.model_dump(exclude=UNHASHED_FIELDS), sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _strip_comment(line: str) -> str:
    quoted = False
    for i, ch in enumerate(line):
        if ch == '"':
            quoted = not quoted
        elif ch == "#" and not quoted:
            return line[:i]
    return line


def _entries(text: str) -> Iterator[Tuple[int, str]]:
    """Top-level `key: value` entries with the line each one starts on"""
    depth, current, start = 0, "", None
    for number, raw in enumerate(text.splitlines(), start=1):
        for ch in _strip_comment(raw):
            if ch in "[(":
                depth += 1
            elif ch in "])":
                depth -= 1
                if depth < 0:
                    raise ConfigError("unbalanced closing bracket", line=number)
            if ch == "," and depth == 0:
                if current.strip():
                    yield start, current
                current, start = "", None
                continue
            if start is None and not ch.isspace():
                start = number
            current += ch
        if depth == 0:
            if current.strip():
                yield start, current
            current, start = "", None
        else:
            current += " "
    if depth != 0:
        raise ConfigError("unbalanced opening bracket", line=start)


def _parse_value(text: str, key: str, line: int):
    text = text.strip()
    if not text:
        raise ConfigError("missing value", field=key, line=line)
    if text[0] == "[":
        try:
            return json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"malformed list: {e.msg}", field=key, line=line)
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text.strip('"\'')


def parse_entries(text: str) -> Dict[str, object]:
    values: Dict[str, object] = {}
    params: Dict[str, float] = {}
    fields = set(RunConfig.model_fields)
    for line, entry in _entries(text):
        if ":" not in entry:
            raise ConfigError(f"expected 'key: value', got '{entry.strip()}'", line=line)
        key, raw = entry.split(":", 1)
        key = key.strip()
        value = _parse_value(raw, key, line)
        if key in BUILTIN_PARAMS:
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError("builtin parameters must be numbers", field=key, line=line)
            params[key] = float(value)
        elif key in fields:
            if key in values:
                raise ConfigError("duplicate key", field=key, line=line)
            values[key] = value
        else:
            raise ConfigError("unknown key", field=key, line=line)
    if params:
        values["params"] = params
    return values


def make_config(values: Dict[str, object]) -> RunConfig:
    try:
        config = RunConfig(**values)
    except ValidationError as e:
        error = e.errors()[0]
        field = ".".join(str(part) for part in error["loc"]) or None
        raise ConfigError(error["msg"], field=field)
    # surface definition errors (matrix shapes, unknown builtins) at parse time
    config.build_system()
    return config


def parse_config(text: str, overrides: Optional[Dict[str, object]] = None) -> RunConfig:
    values = parse_entries(text)
    for key, value in (overrides or {}).items():
        if key == "params":
            merged = dict(values.get("params") or {})
            merged.update(value)
            values["params"] = merged
        elif value is not None:
            values[key] = value
    return make_config(values)

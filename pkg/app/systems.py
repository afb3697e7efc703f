import logging
from typing import Dict, List, Optional

import numpy as np

from app.errors import ConfigError
from app.models import TWO_PI, PeriodicSystem

logger = logging.getLogger(__name__)

SYSTEM_KINDS = ("constant", "trig", "builtin")


class BaseBuiltin:
    """A named example system; parameters are passed through from the run config"""

    def __init__(self, name: str, defaults: Dict[str, float]):
        self.name = name
        self.defaults = defaults

    def resolve(self, params: Optional[Dict[str, float]] = None) -> Dict[str, float]:
        params = dict(params or {})
        unknown = sorted(set(params) - set(self.defaults))
        if unknown:
            raise ConfigError(f"builtin '{self.name}' takes no parameter '{unknown[0]}'",
                              field=unknown[0])
        resolved = dict(self.defaults)
        resolved.update({key: float(value) for key, value in params.items()})
        return resolved

    def build(self, params: Optional[Dict[str, float]] = None) -> PeriodicSystem:
        raise NotImplementedError


class ZeroBuiltin(BaseBuiltin):
    def __init__(self):
        super().__init__("zero", {})

    def build(self, params=None) -> PeriodicSystem:
        self.resolve(params)
        return PeriodicSystem(dimension=2, period=1.0, A0=np.zeros((2, 2)),
                              kind="builtin", name=self.name)


class RotationBuiltin(BaseBuiltin):
    def __init__(self):
        super().__init__("rotation", {"omega": TWO_PI})

    def build(self, params=None) -> PeriodicSystem:
        values = self.resolve(params)
        omega = values["omega"]
        return PeriodicSystem(dimension=2, period=1.0,
                              A0=np.array([[0.0, -omega], [omega, 0.0]]),
                              kind="builtin", name=self.name, params=values)


class HyperbolicBuiltin(BaseBuiltin):
    def __init__(self):
        super().__init__("hyperbolic", {"lambda": 1.0})

    def build(self, params=None) -> PeriodicSystem:
        values = self.resolve(params)
        lam = values["lambda"]
        return PeriodicSystem(dimension=2, period=1.0, A0=np.diag([lam, -lam]),
                              kind="builtin", name=self.name, params=values)


class MathieuBuiltin(BaseBuiltin):
    """x'' + (a + 2q cos(2 pi t)) x = 0 written for the state (x, x')"""

    def __init__(self):
        super().__init__("mathieu", {"a": 1.0, "q": 0.2})

    def build(self, params=None) -> PeriodicSystem:
        values = self.resolve(params)
        A0 = np.array([[0.0, 1.0], [-values["a"], 0.0]])
        A1 = np.array([[0.0, 0.0], [-2.0 * values["q"], 0.0]])
        return PeriodicSystem(dimension=2, period=1.0, A0=A0, Ak=(A1,), Bk=(np.zeros((2, 2)),),
                              kind="builtin", name=self.name, params=values)


def get_all_builtins() -> List[BaseBuiltin]:
    return [
        ZeroBuiltin(),
        RotationBuiltin(),
        HyperbolicBuiltin(),
        MathieuBuiltin()
    ]


def get_builtin(name: str, params: Optional[Dict[str, float]] = None) -> PeriodicSystem:
    for builtin in get_all_builtins():
        if builtin.name == name:
            return builtin.build(params)
    known = ", ".join(builtin.name for builtin in get_all_builtins())
    raise ConfigError(f"unknown builtin '{name}' (known: {known})", field="name")


def _as_matrix(value, dimension: int, field: str) -> np.ndarray:
    if not isinstance(value, (list, tuple)) or len(value) != dimension:
        size = len(value) if isinstance(value, (list, tuple)) else "a scalar"
        raise ConfigError(f"expected {dimension} rows, got {size}", field=field)
    rows = []
    for index, row in enumerate(value):
        if not isinstance(row, (list, tuple)) or len(row) != dimension:
            length = len(row) if isinstance(row, (list, tuple)) else 1
            raise ConfigError(f"row {index} has length {length}, expected {dimension}",
                              field=f"{field}[{index}]")
        try:
            rows.append([float(entry) for entry in row])
        except (TypeError, ValueError):
            raise ConfigError(f"row {index} has a non-numeric entry", field=f"{field}[{index}]")
    matrix = np.array(rows, dtype=float)
    if not np.all(np.isfinite(matrix)):
        raise ConfigError("matrix has non-finite entries", field=field)
    return matrix


def _as_matrix_list(value, dimension: int, field: str) -> List[np.ndarray]:
    if value is None:
        return []
    if not isinstance(value, (list, tuple)):
        raise ConfigError("expected a list of matrices", field=field)
    return [_as_matrix(matrix, dimension, f"{field}[{k}]") for k, matrix in enumerate(value)]


def system_from_definition(definition: Dict[str, object]) -> PeriodicSystem:
    """Build a PeriodicSystem from parsed definition keys

    Keys: dimension, period, kind (constant | trig | builtin), A0, Ak, Bk,
    name for builtins and the builtin parameters.
    """
    kind = str(definition.get("kind", "builtin" if "name" in definition else "constant"))
    if kind not in SYSTEM_KINDS:
        raise ConfigError(f"kind must be one of {', '.join(SYSTEM_KINDS)}", field="kind")

    if kind == "builtin":
        if "name" not in definition:
            raise ConfigError("builtin systems need a name", field="name")
        return get_builtin(str(definition["name"]), definition.get("params") or {})

    try:
        dimension = int(definition.get("dimension", 0))
        period = float(definition.get("period", 1.0))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid number: {e}", field="dimension")
    if dimension < 1:
        raise ConfigError("dimension must be a positive integer", field="dimension")
    if not period > 0:
        raise ConfigError("period must be positive", field="period")
    if "A0" not in definition:
        raise ConfigError("missing coefficient matrix", field="A0")

    A0 = _as_matrix(definition["A0"], dimension, "A0")
    Ak = _as_matrix_list(definition.get("Ak"), dimension, "Ak")
    Bk = _as_matrix_list(definition.get("Bk"), dimension, "Bk")
    if kind == "constant" and (Ak or Bk):
        raise ConfigError("constant systems take no harmonics", field="Ak")
    if Ak and not Bk:
        Bk = [np.zeros((dimension, dimension)) for _ in Ak]
    if Bk and not Ak:
        Ak = [np.zeros((dimension, dimension)) for _ in Bk]
    if len(Ak) != len(Bk):
        raise ConfigError(f"Ak lists {len(Ak)} harmonics but Bk lists {len(Bk)}", field="Bk")

    return PeriodicSystem(dimension=dimension, period=period, A0=A0, Ak=tuple(Ak), Bk=tuple(Bk),
                          kind=kind, name=str(definition.get("name", kind)))


def normalize_period(system: PeriodicSystem) -> PeriodicSystem:
    """Rescale to period 1: the new coefficient is t -> T X(T t)"""
    T = system.period
    if T == 1.0:
        return system
    logger.info(f"Normalizing period {T:g} of {system.label()} to 1")
    return PeriodicSystem(
        dimension=system.dimension,
        period=1.0,
        A0=T * system.A0,
        Ak=tuple(T * a for a in system.Ak),
        Bk=tuple(T * b for b in system.Bk),
        kind=system.kind,
        name=system.name,
        params=dict(system.params),
    )


def shifted(system: PeriodicSystem, s: float) -> PeriodicSystem:
    """The system t -> X(t + s), exact for every trigonometric representation"""
    Ak, Bk = [], []
    for k, (a, b) in enumerate(zip(system.Ak, system.Bk), start=1):
        theta = TWO_PI * k * s / system.period
        c, n = np.cos(theta), np.sin(theta)
        Ak.append(a * c + b * n)
        Bk.append(-a * n + b * c)
    return PeriodicSystem(
        dimension=system.dimension,
        period=system.period,
        A0=np.array(system.A0, copy=True),
        Ak=tuple(Ak),
        Bk=tuple(Bk),
        kind=system.kind,
        name=f"{system.name}+{s:g}",
        params=dict(system.params),
    )

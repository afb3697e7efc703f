"""
Fiber spaces F on which the operators g(t) act, the product S^1 x F, positive
epsilon fields and discrete maps built from a single operator
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from app.errors import ConfigError, FlowError
from app.models import ComparisonFunction, FundamentalConstants

FIBER_KINDS = ("ball", "sphere", "projective")


def circle_distance(s: float, r: float) -> float:
    gap = abs(s - r) % 1.0
    return min(gap, 1.0 - gap)


class FiberSpace:
    kind = ""
    compact = True

    def __init__(self, dimension: int):
        if dimension < 1:
            raise ConfigError(f"fiber dimension must be positive, got {dimension}", field="dimension")
        self.dimension = dimension

    def act(self, G: np.ndarray, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def distance(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(np.linalg.norm(np.asarray(x) - np.asarray(y)))

    def contains(self, x: np.ndarray) -> bool:
        return bool(np.all(np.isfinite(x)))

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float)

    def fiber_part(self, point: np.ndarray) -> np.ndarray:
        return point

    def lipschitz(self, norm: float, inverse_norm: float) -> float:
        """Lipschitz bound of x -> act(G, x) given |G| and |G^-1|"""
        raise NotImplementedError

    def comparison(self, constants: FundamentalConstants) -> ComparisonFunction:
        raise NotImplementedError

    def describe(self) -> str:
        return f"{self.kind}(n={self.dimension})"


class BallFiber(FiberSpace):
    """Closed ball of radius R in R^n with the linear action; leaving it is an escape"""
    kind = "ball"
    compact = False

    def __init__(self, dimension: int, radius: float = 1.0):
        super().__init__(dimension)
        if not radius > 0:
            raise ConfigError(f"ball radius must be positive, got {radius}", field="radius")
        self.radius = float(radius)

    def act(self, G, x):
        return G @ x

    def contains(self, x):
        return bool(np.all(np.isfinite(x))) and float(np.linalg.norm(x)) <= self.radius * (1 + 1e-12)

    def lipschitz(self, norm, inverse_norm):
        return norm

    def comparison(self, constants):
        return constants.comparison()

    def describe(self):
        return f"ball(R={self.radius:g}, n={self.dimension})"


class SphereFiber(FiberSpace):
    """Unit sphere with the normalized action and the chordal metric"""
    kind = "sphere"

    def act(self, G, x):
        return self.normalize(G @ x)

    def normalize(self, x):
        x = np.asarray(x, dtype=float)
        size = float(np.linalg.norm(x))
        if size == 0.0 or not np.isfinite(size):
            raise FlowError("cannot normalize a zero or non-finite fiber vector")
        return x / size

    def contains(self, x):
        return bool(np.all(np.isfinite(x))) and abs(float(np.linalg.norm(x)) - 1.0) < 1e-9

    def lipschitz(self, norm, inverse_norm):
        return 2.0 * norm * inverse_norm

    def comparison(self, constants):
        return ComparisonFunction(slope=0.0,
                                  floor=max(2.0 * constants.B * constants.D, 2.0 * constants.D ** 2))


class ProjectiveFiber(SphereFiber):
    """Lines through the origin: unit vectors whose first nonzero coordinate is positive"""
    kind = "projective"

    def normalize(self, x):
        x = super().normalize(x)
        nonzero = np.flatnonzero(x)
        if len(nonzero) and x[nonzero[0]] < 0:
            x = -x
        return x

    def distance(self, x, y):
        x, y = np.asarray(x), np.asarray(y)
        return float(min(np.linalg.norm(x - y), np.linalg.norm(x + y)))


def make_fiber(kind: str, dimension: int, radius: float = 1.0) -> FiberSpace:
    if kind == "ball":
        return BallFiber(dimension, radius)
    if kind == "sphere":
        return SphereFiber(dimension)
    if kind == "projective":
        return ProjectiveFiber(dimension)
    raise ConfigError(f"fiber must be one of {', '.join(FIBER_KINDS)}, got '{kind}'", field="fiber")


def default_fiber_kind(dimension: int) -> str:
    return "projective" if dimension >= 2 else "ball"


class ProductSpace:
    """S^1 x F with points stored as flat arrays [s, x1..xn] and the sum metric"""

    def __init__(self, fiber: FiberSpace):
        self.fiber = fiber
        self.dimension = fiber.dimension + 1
        self.kind = f"S1x{fiber.kind}"

    def distance(self, p: np.ndarray, q: np.ndarray) -> float:
        return circle_distance(p[0], q[0]) + self.fiber.distance(p[1:], q[1:])

    def contains(self, point: np.ndarray) -> bool:
        return bool(np.isfinite(point[0])) and self.fiber.contains(point[1:])

    def fiber_part(self, point: np.ndarray) -> np.ndarray:
        return point[1:]

    def describe(self) -> str:
        return f"S1 x {self.fiber.describe()}"


@dataclass(frozen=True)
class EpsilonField:
    """epsilon(x) = value + slope * |x| evaluated on the fiber part of a point"""
    value: float
    slope: float = 0.0

    def __post_init__(self):
        if not self.value > 0:
            raise ConfigError(f"epsilon must be positive, got {self.value}", field="epsilon")
        if self.slope < 0:
            raise ConfigError(f"epsilon slope must be nonnegative, got {self.slope}", field="epsilon_slope")

    @property
    def constant(self) -> bool:
        return self.slope == 0.0

    def __call__(self, x: np.ndarray) -> float:
        if self.slope == 0.0:
            return self.value
        return self.value + self.slope * float(np.linalg.norm(x))

    def at(self, space, point: np.ndarray) -> float:
        return self(space.fiber_part(point))

    def describe(self) -> str:
        if self.constant:
            return f"{self.value:g}"
        return f"{self.value:g} + {self.slope:g}|x|"


class OperatorMap:
    """x -> act(G, x) on a fiber space"""

    def __init__(self, space: FiberSpace, operator: np.ndarray, label: Optional[str] = None):
        self.space = space
        self.operator = np.asarray(operator, dtype=float)
        self.label = label or "G"

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.space.act(self.operator, x)

    def power(self, k: int) -> "OperatorMap":
        return OperatorMap(self.space, np.linalg.matrix_power(self.operator, k), f"{self.label}^{k}")

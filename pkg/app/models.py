from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from app.errors import ChainConstructionError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True, eq=False)
class PeriodicSystem:
    """Coefficient curve X(t) of x' = X(t)x as a truncated trigonometric series

    X(t) = A0 + sum_k Ak[k-1] cos(2 pi k t / T) + Bk[k-1] sin(2 pi k t / T).
    Constant matrices and the builtins are series with few (or no) harmonics,
    so periodicity is exact for every representation.
    """
    dimension: int
    period: float
    A0: np.ndarray
    Ak: Tuple[np.ndarray, ...] = ()
    Bk: Tuple[np.ndarray, ...] = ()
    kind: str = "trig"
    name: str = ""
    params: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError(f"dimension must be positive, got {self.dimension}")
        if not self.period > 0 or not np.isfinite(self.period):
            raise ValueError(f"period must be a positive real, got {self.period}")
        if len(self.Ak) != len(self.Bk):
            raise ValueError("Ak and Bk must list the same number of harmonics")
        shape = (self.dimension, self.dimension)
        for label, matrix in [("A0", self.A0)] + [(f"Ak[{i}]", m) for i, m in enumerate(self.Ak)] \
                + [(f"Bk[{i}]", m) for i, m in enumerate(self.Bk)]:
            if matrix.shape != shape:
                raise ValueError(f"{label} has shape {matrix.shape}, expected {shape}")
            if not np.all(np.isfinite(matrix)):
                raise ValueError(f"{label} has non-finite entries")

    def coefficient(self, t: float) -> np.ndarray:
        value = np.array(self.A0, dtype=float, copy=True)
        for k, (a, b) in enumerate(zip(self.Ak, self.Bk), start=1):
            angle = TWO_PI * k * t / self.period
            value += a * np.cos(angle) + b * np.sin(angle)
        return value

    def label(self) -> str:
        if not self.params:
            return self.name or self.kind
        args = ", ".join(f"{key}={value:g}" for key, value in self.params.items())
        return f"{self.name}({args})"


@dataclass(frozen=True)
class ComparisonFunction:
    """c(x) = max{slope * |x|, floor}; slope is 0 for the constant form"""
    slope: float
    floor: float

    def __call__(self, x: np.ndarray) -> float:
        return max(self.slope * float(np.linalg.norm(x)), self.floor)


@dataclass(frozen=True)
class FundamentalConstants:
    C: float
    B: float
    D: float
    # spacing of the [-2, 2] grid the bounds B and D were certified on
    grid_spacing: float

    def comparison(self) -> ComparisonFunction:
        return ComparisonFunction(slope=self.B * self.D, floor=self.D)


@dataclass(frozen=True, eq=False)
class FundamentalSolution:
    """Grid samples of g(t) on [0, 1] for a period-1 system; immutable once built"""
    system: PeriodicSystem
    grid: np.ndarray
    samples: np.ndarray
    monodromy: np.ndarray
    monodromy_inverse: np.ndarray
    step_count: int
    constants: Optional[FundamentalConstants] = None

    @property
    def dimension(self) -> int:
        return self.system.dimension

    @property
    def step(self) -> float:
        return 1.0 / self.step_count


@dataclass(frozen=True, eq=False)
class SkewPoint:
    """Point (s, x) of S^1 x F with canonical base coordinate s in [0, 1)"""
    s: float
    x: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.s < 1.0:
            raise ValueError(f"base coordinate must lie in [0, 1), got {self.s!r}")

    def as_array(self) -> np.ndarray:
        return np.concatenate([[self.s], self.x])

    @classmethod
    def from_array(cls, values: np.ndarray) -> "SkewPoint":
        return cls(s=float(values[0]), x=np.asarray(values[1:], dtype=float))


@dataclass(frozen=True)
class TimeSplit:
    tau: float
    n: int


@dataclass(frozen=True, eq=False)
class SuspensionSet:
    base_grid: np.ndarray
    # one (|E|, n) array per base grid value
    fibers: Tuple[np.ndarray, ...]

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for s, points in zip(self.base_grid, self.fibers):
            for point in points:
                rows.append([s, *point])
        dimension = self.fibers[0].shape[1] if self.fibers else 0
        columns = ["s"] + [f"x{i + 1}" for i in range(dimension)]
        return pd.DataFrame(rows, columns=columns)


@dataclass(frozen=True)
class ComponentSet:
    index: int
    member_boxes: FrozenSet[int]

    def __contains__(self, box: int) -> bool:
        return box in self.member_boxes


DISCRETE = "discrete-F"
SUSPENSION = "suspension"


@dataclass(frozen=True, eq=False)
class ChainWitness:
    """An explicit (epsilon, t)-chain

    k steps: points p_0..p_k, times t_1..t_k, step i goes from p_{i-1} to p_i.
    Suspension points are stored as rows [s, x1..xn].
    """
    points: np.ndarray
    times: np.ndarray
    t_min: float
    residuals: np.ndarray
    bounds: np.ndarray
    space_tag: str = DISCRETE
    # strict: residual < bound; otherwise residual <= bound
    strict: bool = True
    note: str = ""
    # projection case (1, 2 or 3) chosen per step, empty for other chains
    cases: Tuple[int, ...] = ()

    @property
    def length(self) -> int:
        return len(self.times)

    @property
    def start(self) -> np.ndarray:
        return self.points[0]

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]

    def validate(self) -> "ChainWitness":
        if len(self.points) != len(self.times) + 1:
            raise ChainConstructionError(
                f"chain has {len(self.points)} points for {len(self.times)} times")
        for i, t in enumerate(self.times, start=1):
            if not t > self.t_min:
                raise ChainConstructionError(f"time {t} does not exceed t_min={self.t_min}", step=i)
        for i, (residual, bound) in enumerate(zip(self.residuals, self.bounds), start=1):
            violated = residual >= bound if self.strict else residual > bound
            if violated or not np.isfinite(residual):
                raise ChainConstructionError("residual violates its bound", step=i,
                                             residual=float(residual), bound=float(bound))
        return self

    def to_frame(self) -> pd.DataFrame:
        """Per-step residual table"""
        dimension = self.points.shape[1]
        if self.space_tag == SUSPENSION:
            names = ["s"] + [f"x{i}" for i in range(1, dimension)]
        else:
            names = [f"x{i}" for i in range(1, dimension + 1)]
        rows = []
        for i in range(self.length + 1):
            row = {"step": i}
            row.update({name: value for name, value in zip(names, self.points[i])})
            if i == 0:
                row.update({"time": np.nan, "residual": np.nan, "bound": np.nan})
            else:
                row.update({"time": self.times[i - 1], "residual": self.residuals[i - 1],
                            "bound": self.bounds[i - 1]})
            if self.cases:
                row["case"] = self.cases[i - 1] if i else 0
            rows.append(row)
        return pd.DataFrame(rows)


class CheckRecord(BaseModel):
    name: str
    inputs: Dict[str, object] = Field(default_factory=dict)
    residual: Optional[float] = None
    bound: Optional[float] = None
    tolerance: Optional[float] = None
    # pass | fail | certified | not-observed
    verdict: str = "pass"
    detail: str = ""

    @property
    def failed(self) -> bool:
        return self.verdict == "fail"


THEOREM_IDS = ["prop-recurrence", "prop-lift", "thm-chain", "cor-bijection", "prop-stable"]


class VerificationReport(BaseModel):
    theorem_id: str
    system: str
    fiber: str
    seed: int
    records: List[CheckRecord] = Field(default_factory=list)

    @property
    def failures(self) -> int:
        return sum(1 for record in self.records if record.failed)

    @property
    def passed(self) -> bool:
        return self.failures == 0

    def summary_line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (f"THEOREM {self.theorem_id} {verdict} checks={len(self.records)} "
                f"failures={self.failures} seed={self.seed}")

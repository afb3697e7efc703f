"""
The suspension flow phi^t(s, x) = (s + t, g(t + s) g(s)^-1 x) on S^1 x F
"""

import logging
import math
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from app.errors import ConfigError, FlowError
from app.fibers import FiberSpace, ProductSpace, circle_distance
from app.fundamental import evaluate_g, inverse_g
from app.models import FundamentalSolution, SkewPoint, SuspensionSet, TimeSplit

logger = logging.getLogger(__name__)

OPERATOR_CACHE_SIZE = 4096


def canonical_base(r: float) -> float:
    s = r % 1.0
    # r % 1.0 rounds to 1.0 for tiny negative r
    return 0.0 if s >= 1.0 else s


def canonical_rep(r: float, y: np.ndarray, fs: FundamentalSolution,
                  fiber: Optional[FiberSpace] = None) -> SkewPoint:
    """(r, y) written as (s, g(s)x) with s in [0, 1)"""
    s = canonical_base(r)
    inverse = inverse_g(fs, s)
    y = np.asarray(y, dtype=float)
    x = fiber.act(inverse, y) if fiber is not None else inverse @ y
    return SkewPoint(s=s, x=x)


def decompose_time(s: float, t: float) -> TimeSplit:
    if not 0.0 <= s < 1.0:
        raise ValueError(f"base coordinate must lie in [0, 1), got {s}")
    if t < 0:
        raise ValueError(f"time decomposition needs t >= 0, got {t}")
    n = math.floor(s + t)
    tau = t - n
    if s + tau < 0.0:
        n, tau = n - 1, tau + 1.0
    elif s + tau >= 1.0:
        n, tau = n + 1, tau - 1.0
    assert -1.0 < tau < 1.0 and 0.0 <= s + tau < 1.0, (s, t, tau, n)
    return TimeSplit(tau=tau, n=n)


def flow_operator(fs: FundamentalSolution, s: float, t: float) -> np.ndarray:
    """Fiber operator of phi^t over the base point s"""
    if t >= 0:
        split = decompose_time(s, t)
        operator = evaluate_g(fs, s + split.tau)
        if split.n:
            operator = operator @ np.linalg.matrix_power(fs.monodromy, split.n)
        return operator @ inverse_g(fs, s)
    return evaluate_g(fs, s + t) @ inverse_g(fs, s)


def _advance_base(s: float, t: float) -> float:
    if t >= 0:
        return s + decompose_time(s, t).tau
    return canonical_base(s + t)


def flow_point(fs: FundamentalSolution, t: float, point: np.ndarray,
               fiber: Optional[FiberSpace] = None) -> np.ndarray:
    """phi^t on a flat point [s, x1..xn]"""
    s = float(point[0])
    operator = flow_operator(fs, s, t)
    x = np.asarray(point[1:], dtype=float)
    image = fiber.act(operator, x) if fiber is not None else operator @ x
    if not np.all(np.isfinite(image)):
        logger.error(f"Flow produced non-finite fiber coordinates at s={s}, t={t}")
        raise FlowError(f"non-finite image of the point over s={s} at time {t}")
    return np.concatenate([[_advance_base(s, t)], image])


def phi(fs: FundamentalSolution, t: float, p: SkewPoint,
        fiber: Optional[FiberSpace] = None) -> SkewPoint:
    return SkewPoint.from_array(flow_point(fs, t, p.as_array(), fiber))


def skew_metric(p: SkewPoint, q: SkewPoint, fiber: Optional[FiberSpace] = None) -> float:
    fiber_distance = fiber.distance(p.x, q.x) if fiber is not None else float(np.linalg.norm(p.x - q.x))
    return circle_distance(p.s, q.s) + fiber_distance


def suspend_point(fs: FundamentalSolution, s: float, x: np.ndarray,
                  fiber: Optional[FiberSpace] = None) -> np.ndarray:
    """The flat point (s, g(s)x)"""
    G = evaluate_g(fs, s)
    y = fiber.act(G, x) if fiber is not None else G @ x
    return np.concatenate([[s], y])


def suspend_set(fs: FundamentalSolution, E: Sequence[np.ndarray], base_resolution: int,
                fiber: Optional[FiberSpace] = None) -> SuspensionSet:
    points = np.atleast_2d(np.asarray(E, dtype=float))
    if points.size == 0:
        raise ConfigError("the sampled set E is empty", field="E")
    if base_resolution < 2:
        raise ConfigError(f"base resolution must be at least 2, got {base_resolution}",
                          field="base_resolution")
    base_grid = np.arange(base_resolution) / base_resolution
    fibers = []
    for s in base_grid:
        G = evaluate_g(fs, s)
        if fiber is None:
            fibers.append(points @ G.T)
        else:
            fibers.append(np.array([fiber.act(G, e) for e in points]))
    return SuspensionSet(base_grid=base_grid, fibers=tuple(fibers))


class SuspensionMap:
    """phi^time on S^1 x F as a discrete map on flat points"""

    def __init__(self, fs: FundamentalSolution, fiber: FiberSpace, time: float = 1.0):
        self.fs = fs
        self.fiber = fiber
        self.time = float(time)
        self.space = ProductSpace(fiber)
        self.label = f"phi^{self.time:g}"
        # samples of a product cover repeat a few base coordinates per base cell
        self.operator = lru_cache(maxsize=OPERATOR_CACHE_SIZE)(self._operator)

    def _operator(self, s: float) -> np.ndarray:
        return flow_operator(self.fs, s, self.time)

    def __call__(self, point: np.ndarray) -> np.ndarray:
        s = float(point[0])
        image = self.fiber.act(self.operator(s), np.asarray(point[1:], dtype=float))
        return np.concatenate([[_advance_base(s, self.time)], image])

    def power(self, k: int) -> "SuspensionMap":
        return SuspensionMap(self.fs, self.fiber, self.time * k)

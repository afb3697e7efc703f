"""
Chain transformations between the monodromy map on F and the suspension flow

lift_chain turns a chain of the discrete system into a chain of the flow;
project_chain turns a closed chain of the time-one flow back into a closed
chain of the discrete system. Both recompute every residual at the points
they actually build and refuse to return a chain that breaks its bounds.
"""

import logging
import math
from typing import Callable, List, Optional, Tuple

import numpy as np

from app.errors import CaseSelectionError, ChainPreconditionError, ConfigError, EvaluationError
from app.fibers import EpsilonField, FiberSpace, circle_distance
from app.fundamental import constants_of, evaluate_g, inverse_g
from app.models import DISCRETE, SUSPENSION, ChainWitness, FundamentalSolution
from app.suspension import canonical_base, canonical_rep, flow_point, suspend_point

logger = logging.getLogger(__name__)

GRID_SAFETY = 0.9
DEFAULT_GRID = 16
ENDPOINT_TOLERANCE = 1e-12
BASE_SWEEP = 8

SuspensionEpsilon = Callable[[np.ndarray], float]


def _act(fiber: Optional[FiberSpace], G: np.ndarray, x: np.ndarray) -> np.ndarray:
    return fiber.act(G, x) if fiber is not None else G @ x


def _distance(fiber: Optional[FiberSpace], x: np.ndarray, y: np.ndarray) -> float:
    return fiber.distance(x, y) if fiber is not None else float(np.linalg.norm(x - y))


def _skew_distance(fiber: Optional[FiberSpace], p: np.ndarray, q: np.ndarray) -> float:
    return circle_distance(p[0], q[0]) + _distance(fiber, p[1:], q[1:])


def _power(fs: FundamentalSolution, n: int) -> np.ndarray:
    if n >= 0:
        return np.linalg.matrix_power(fs.monodromy, n)
    return np.linalg.matrix_power(fs.monodromy_inverse, -n)


def on_suspension(epsilon) -> SuspensionEpsilon:
    """Read a fiber epsilon field as a field on flat suspension points"""
    if isinstance(epsilon, EpsilonField):
        return lambda point: epsilon(point[1:])
    return epsilon


def min_over_grid(fn: Callable[[float], float], grid_size: int = DEFAULT_GRID) -> float:
    """Minimum of fn over r = i / M, i = 0..M; over-estimates the true minimum"""
    if grid_size < 16:
        raise ConfigError(f"grid size must be at least 16, got {grid_size}", field="grid_size")
    values = [fn(i / grid_size) for i in range(grid_size + 1)]
    if not all(np.isfinite(values)):
        raise EvaluationError(f"non-finite value on the minimization grid: {values}")
    return float(min(values))


def lift_constants(fs: FundamentalSolution, fiber: Optional[FiberSpace] = None) -> Tuple[float, float]:
    """(L, L_u): Lipschitz bounds of the fiber maps of the two lift stages

    L bounds x -> g(r)x for r in [0, 1]; L_u bounds the fiber maps
    g(r + u)g(r)^-1 of phi^u, whose norms are at most D^2.
    """
    constants = constants_of(fs)
    if fiber is None or not fiber.compact:
        return constants.C, constants.D ** 2
    return fiber.lipschitz(constants.C, constants.D), fiber.lipschitz(constants.D ** 2, constants.D ** 2)


def delta_for_lift(fs: FundamentalSolution, epsilon, z: np.ndarray, grid_size: int = DEFAULT_GRID,
                   fiber: Optional[FiberSpace] = None, lipschitz: Optional[float] = None) -> float:
    """0.9 / L * min over r of epsilon(r, g(r)z)"""
    field = on_suspension(epsilon)
    if lipschitz is None:
        lipschitz = lift_constants(fs, fiber)[0]
    z = np.asarray(z, dtype=float)
    smallest = min_over_grid(lambda r: field(suspend_point(fs, r, z, fiber)), grid_size)
    return GRID_SAFETY * smallest / lipschitz


class ConjugatedEpsilon:
    """epsilon_u(p) = epsilon(phi^u(p)) / L_u"""

    def __init__(self, fs: FundamentalSolution, epsilon, u: float, lipschitz: float,
                 fiber: Optional[FiberSpace] = None):
        self.fs = fs
        self.field = on_suspension(epsilon)
        self.u = u
        self.lipschitz = lipschitz
        self.fiber = fiber

    def __call__(self, point: np.ndarray) -> float:
        return self.field(flow_point(self.fs, self.u, point, self.fiber)) / self.lipschitz


def lift_delta(fs: FundamentalSolution, epsilon, u: float, fiber: Optional[FiberSpace] = None,
               grid_size: int = DEFAULT_GRID) -> Callable[[np.ndarray], float]:
    """z -> delta(z) a discrete chain must respect to be lifted with start offset u"""
    L, L_u = lift_constants(fs, fiber)
    conjugated = ConjugatedEpsilon(fs, epsilon, u, L_u, fiber)
    if isinstance(epsilon, EpsilonField) and epsilon.constant:
        value = GRID_SAFETY * epsilon.value / (L * L_u)
        return lambda z: value
    return lambda z: delta_for_lift(fs, conjugated, z, grid_size, fiber, L)


def retarget_for_wrap(fs: FundamentalSolution, chain: ChainWitness,
                      fiber: Optional[FiberSpace] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Points and integer times of the chain re-aimed at g^-1 y with final time n_k - 1"""
    points = np.array(chain.points, copy=True)
    times = np.array(chain.times, copy=True)
    points[-1] = _act(fiber, fs.monodromy_inverse, points[-1])
    times[-1] -= 1
    return points, times


def lift_chain(fs: FundamentalSolution, chain: ChainWitness, u: float, v: float, epsilon,
               fiber: Optional[FiberSpace] = None, grid_size: int = DEFAULT_GRID) -> ChainWitness:
    """Lift a chain x -> y of the monodromy map to a chain (u, g(u)x) -> (v, g(v)y) of the flow"""
    if chain.space_tag != DISCRETE:
        raise ChainPreconditionError("lift_chain expects a chain of the discrete system")
    if not (0.0 <= u < 1.0 and 0.0 <= v < 1.0):
        raise ChainPreconditionError(f"u and v must lie in [0, 1), got {u}, {v}")
    field = on_suspension(epsilon)
    delta = lift_delta(fs, epsilon, u, fiber, grid_size)

    wrap = v < u
    if wrap:
        points, times = retarget_for_wrap(fs, chain, fiber)
    else:
        points, times = np.asarray(chain.points, dtype=float), np.asarray(chain.times, dtype=float)
    k = len(times)
    s = (1.0 + v - u) if wrap else (v - u)
    r = s / k

    for i in range(1, k + 1):
        n = int(round(times[i - 1]))
        if n != times[i - 1] or n < 0:
            raise ChainPreconditionError("discrete chain times must be nonnegative integers", step=i)
        if n + r <= chain.t_min:
            raise ChainPreconditionError(f"lifted time {n + r} does not exceed t_min={chain.t_min}", step=i)
        image = _act(fiber, _power(fs, n), points[i - 1])
        residual = _distance(fiber, points[i], image)
        bound = delta(image)
        if not residual < bound:
            raise ChainPreconditionError("input chain is not fine enough to lift", step=i,
                                         residual=residual, bound=bound)

    eta = [np.concatenate([[0.0], points[0]])]
    for i in range(1, k + 1):
        eta.append(suspend_point(fs, i * r, points[i], fiber))
    lifted_times = np.array([float(n) + r for n in times])
    xi = [flow_point(fs, u, p, fiber) for p in eta]

    residuals, bounds = [], []
    for i in range(1, k + 1):
        image = flow_point(fs, lifted_times[i - 1], xi[i - 1], fiber)
        residuals.append(_skew_distance(fiber, xi[i], image))
        bounds.append(field(image))

    witness = ChainWitness(
        points=np.array(xi),
        times=lifted_times,
        t_min=chain.t_min,
        residuals=np.array(residuals),
        bounds=np.array(bounds),
        space_tag=SUSPENSION,
        note=f"lifted with u={u:.17g}, v={v:.17g}" + (", wrapped" if wrap else ""),
    )
    logger.info(f"Lifted a {k}-step chain with u={u:.4f}, v={v:.4f} (wrap={wrap})")
    return witness.validate()


def delta_for_project(fs: FundamentalSolution, epsilon: EpsilonField, point: np.ndarray,
                      grid_size: int = DEFAULT_GRID, fiber: Optional[FiberSpace] = None) -> float:
    """0.9 * 1/2 * min over t of epsilon(w) / c(w), w = g(t)^-1 y, for the point (r, y)"""
    constants = constants_of(fs)
    comparison = fiber.comparison(constants) if fiber is not None else constants.comparison()
    y = np.asarray(point[1:], dtype=float)

    def ratio(t: float) -> float:
        w = _act(fiber, inverse_g(fs, t), y)
        return epsilon(w) / comparison(w)

    return GRID_SAFETY * 0.5 * min_over_grid(ratio, grid_size)


def select_case(previous: float, current: float, delta: float) -> Optional[int]:
    """Case of the projection table for base coordinates s_{i-1} -> s_i, first match wins"""
    if abs(current - previous) < delta:
        return 1
    if (1.0 + previous) - current < delta:
        return 2
    if current - (previous - 1.0) < delta:
        return 3
    return None


CASE_SHIFT = {1: 0, 2: -1, 3: 1}


def project_chain(fs: FundamentalSolution, chain: ChainWitness, epsilon: EpsilonField, n_min: int = 1,
                  fiber: Optional[FiberSpace] = None, grid_size: int = DEFAULT_GRID) -> ChainWitness:
    """Project a closed chain of phi^1 at (s, g(s)x) to a closed chain of g at x"""
    if chain.space_tag != SUSPENSION:
        raise ChainPreconditionError("project_chain expects a chain of the suspension flow")
    points = np.asarray(chain.points, dtype=float)
    if np.max(np.abs(points[-1] - points[0])) > ENDPOINT_TOLERANCE:
        raise ChainPreconditionError("chain does not return to its starting point")

    k = chain.length
    ms = []
    for i in range(1, k + 1):
        m = int(round(chain.times[i - 1]))
        if m != chain.times[i - 1] or m <= 2 * n_min:
            raise ChainPreconditionError(f"time {chain.times[i - 1]} must be an integer above 2*n_min={2 * n_min}",
                                         step=i)
        ms.append(m)

    deltas = []
    for i in range(1, k + 1):
        image = flow_point(fs, float(ms[i - 1]), points[i - 1], fiber)
        delta = delta_for_project(fs, epsilon, image, grid_size, fiber)
        residual = _skew_distance(fiber, points[i], image)
        if not residual < delta:
            raise ChainPreconditionError("suspension chain is not fine enough to project", step=i,
                                         residual=residual, bound=delta)
        deltas.append(delta)

    xs = [canonical_rep(p[0], p[1:], fs, fiber).x for p in points]
    xs[-1] = np.array(xs[0], copy=True)

    cases, ns, residuals, bounds = [], [], [], []
    for i in range(1, k + 1):
        case = select_case(points[i - 1][0], points[i][0], deltas[i - 1])
        if case is None:
            logger.error(f"No projection case matches step {i}")
            raise CaseSelectionError("no case of the projection table matches", step=i)
        n = ms[i - 1] + CASE_SHIFT[case]
        if n <= n_min:
            raise CaseSelectionError(f"projected time {n} does not exceed n_min={n_min}", step=i)
        image = _act(fiber, _power(fs, n), xs[i - 1])
        cases.append(case)
        ns.append(float(n))
        residuals.append(_distance(fiber, xs[i], image))
        bounds.append(epsilon(image))

    witness = ChainWitness(
        points=np.array(xs),
        times=np.array(ns),
        t_min=float(n_min),
        residuals=np.array(residuals),
        bounds=np.array(bounds),
        space_tag=DISCRETE,
        strict=False,
        note=f"projected from base s={points[0][0]:.17g}",
        cases=tuple(cases),
    )
    return witness.validate()


def random_discrete_chain(fs: FundamentalSolution, start: np.ndarray, steps: int, t_min: float,
                          bound: Callable[[np.ndarray], float], rng: np.random.Generator,
                          fiber: Optional[FiberSpace] = None, fraction: float = 0.5,
                          extra_time: int = 2, first_time: Optional[int] = None) -> ChainWitness:
    """A chain of the monodromy map whose residuals stay below fraction * bound(image)"""
    first = first_time if first_time is not None else int(math.floor(t_min)) + 1
    x = fiber.normalize(start) if fiber is not None else np.asarray(start, dtype=float)
    points, times, residuals, bounds = [x], [], [], []
    for _ in range(steps):
        n = int(rng.integers(first, first + extra_time + 1))
        image = _act(fiber, _power(fs, n), points[-1])
        limit = bound(image)
        direction = rng.normal(size=image.shape)
        direction /= np.linalg.norm(direction)
        size = fraction * limit * rng.uniform(0.2, 1.0)
        while True:
            candidate = image + size * direction
            if fiber is not None:
                candidate = fiber.normalize(candidate)
            residual = _distance(fiber, candidate, image)
            if residual < fraction * limit:
                break
            size *= 0.5
        points.append(candidate)
        times.append(float(n))
        residuals.append(residual)
        bounds.append(limit)
    return ChainWitness(points=np.array(points), times=np.array(times), t_min=t_min,
                        residuals=np.array(residuals), bounds=np.array(bounds),
                        space_tag=DISCRETE).validate()


def random_lift_chain(fs: FundamentalSolution, epsilon, u: float, v: float, start: np.ndarray, steps: int,
                      t_min: float, rng: np.random.Generator, fiber: Optional[FiberSpace] = None,
                      fraction: float = 0.5) -> ChainWitness:
    """A discrete chain lift_chain accepts for the offsets u, v

    When v < u the last step is drawn around g^(n_k - 1) x_{k-1}, so the
    re-aimed chain inherits the residual margin.
    """
    delta = lift_delta(fs, epsilon, u, fiber)
    if v >= u:
        return random_discrete_chain(fs, start, steps, t_min, delta, rng, fiber, fraction)

    first = max(int(math.floor(t_min)) + 1, 2)
    origin = fiber.normalize(start) if fiber is not None else np.asarray(start, dtype=float)
    head = random_discrete_chain(fs, origin, steps - 1, t_min, delta, rng, fiber, fraction,
                                 first_time=first)
    last_point = head.points[-1]
    tail = random_discrete_chain(fs, last_point, 1, t_min - 1, delta, rng, fiber, fraction,
                                 first_time=first - 1)
    y = _act(fiber, fs.monodromy, tail.points[-1])
    n_last = int(tail.times[0]) + 1
    image = _act(fiber, _power(fs, n_last), last_point)
    norm, inverse_norm = np.linalg.norm(fs.monodromy, 2), np.linalg.norm(fs.monodromy_inverse, 2)
    lipschitz = fiber.lipschitz(norm, inverse_norm) if fiber is not None else norm
    return ChainWitness(
        points=np.vstack([head.points, [y]]),
        times=np.append(head.times, float(n_last)),
        t_min=t_min,
        residuals=np.append(head.residuals, _distance(fiber, y, image)),
        bounds=np.append(head.bounds, lipschitz * tail.bounds[0]),
        space_tag=DISCRETE,
        note="last step sized for the re-aimed chain",
    ).validate()


def random_suspension_chain(fs: FundamentalSolution, start: np.ndarray, epsilon: EpsilonField, n_min: int,
                            steps: int, rng: np.random.Generator, fiber: Optional[FiberSpace] = None,
                            wraps: bool = False, period: int = 1, fraction: float = 0.4,
                            grid_size: int = DEFAULT_GRID, attempts: int = 40) -> ChainWitness:
    """A closed chain of phi^1 through (s0, g(s0) start) with integer times above 2 n_min

    start should be periodic for the monodromy map with the given period. With
    wraps the base coordinate crosses the seam 0 ~ 1 forward and then back,
    exercising both wrap cases of the projection table.
    """
    if wraps and steps < 3:
        raise ConfigError("a wrapping chain needs at least 3 steps", field="steps")
    x = fiber.normalize(start) if fiber is not None else np.asarray(start, dtype=float)
    lowest = period * (2 * n_min // period + 1)
    times = [float(lowest + period * int(rng.integers(0, 2))) for _ in range(steps)]
    directions = [rng.normal(size=x.shape) for _ in range(steps)]
    directions = [d / np.linalg.norm(d) for d in directions]
    jitter = [float(rng.uniform(0.5, 1.0)) for _ in range(steps)]
    s_random = float(rng.uniform(0.2, 0.8))

    reference = delta_for_project(fs, epsilon, suspend_point(fs, 0.0, x, fiber), grid_size, fiber)
    scale = fraction * reference
    for _ in range(attempts):
        shift = scale if wraps else 0.5 * scale
        s0 = 1.0 - 0.5 * shift if wraps else s_random
        shifts = [shift, -shift] + [0.0] * (steps - 2) if steps >= 2 else [0.0]
        unwrapped = s0
        z = x
        points = [suspend_point(fs, s0, x, fiber)]
        for i in range(1, steps):
            unwrapped += shifts[i - 1]
            z = _act(fiber, _power(fs, int(times[i - 1])), z)
            z = z + 0.25 * scale * jitter[i - 1] * directions[i - 1]
            if fiber is not None:
                z = fiber.normalize(z)
            base = canonical_base(unwrapped)
            y = _act(fiber, evaluate_g(fs, unwrapped), z)
            points.append(np.concatenate([[base], y]))
        points.append(np.array(points[0], copy=True))

        residuals, bounds = [], []
        for i in range(1, steps + 1):
            image = flow_point(fs, times[i - 1], points[i - 1], fiber)
            residuals.append(_skew_distance(fiber, points[i], image))
            bounds.append(delta_for_project(fs, epsilon, image, grid_size, fiber))
        if all(r < b for r, b in zip(residuals, bounds)):
            return ChainWitness(points=np.array(points), times=np.array(times), t_min=float(n_min),
                                residuals=np.array(residuals), bounds=np.array(bounds),
                                space_tag=SUSPENSION, note="wrapping" if wraps else "").validate()
        scale *= 0.5
    raise ChainPreconditionError(f"could not build a fine enough closed chain in {attempts} attempts")


def recurrence_chain(fs: FundamentalSolution, x: np.ndarray, s: float, q: int, epsilon: EpsilonField,
                     fiber: Optional[FiberSpace] = None, grid_size: int = DEFAULT_GRID) -> ChainWitness:
    """One-step closed chain of phi^1 at (s, g(s)x) with time q"""
    start = suspend_point(fs, s, x, fiber)
    image = flow_point(fs, float(q), start, fiber)
    return ChainWitness(points=np.array([start, start]), times=np.array([float(q)]), t_min=0.0,
                        residuals=np.array([_skew_distance(fiber, start, image)]),
                        bounds=np.array([delta_for_project(fs, epsilon, image, grid_size, fiber)]),
                        space_tag=SUSPENSION)


def suspended_boxes(fs: FundamentalSolution, cover, points: np.ndarray,
                    fiber: Optional[FiberSpace] = None) -> frozenset:
    """Boxes of a product cover met by the curves s -> (s, g(s)p), swept through each base cell"""
    M = cover.base_resolution
    boxes = set()
    for j in range(M):
        for k in range(BASE_SWEEP):
            s = (j + (k + 0.5) / BASE_SWEEP) / M
            G = evaluate_g(fs, s)
            for p in points:
                boxes.update(cover.locate_all(np.concatenate([[s], _act(fiber, G, p)])))
    return frozenset(boxes)


def chain_summary(witness: ChainWitness) -> List[str]:
    return [f"step {i}: time {t:g}, residual {r:.3e} < bound {b:.3e}"
            for i, (t, r, b) in enumerate(zip(witness.times, witness.residuals, witness.bounds), start=1)]

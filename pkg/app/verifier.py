"""
Numerical checks that the chain structure of the monodromy map on F and of the
suspension flow on S^1 x F correspond

Each check returns CheckRecords; a mathematical failure is a record with
verdict "fail", never an exception.
"""

import logging
import zlib
from concurrent.futures import ThreadPoolExecutor
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from app.boxes import ProductCover, build_box_cover
from app.chains import (ComponentDecomposition, RecurrenceCertificate, build_transition_graph, chain_components,
                        core_points, find_box_chain, is_recurrent_sample, stable_set_sample)
from app.config import RunConfig
from app.correspondence import (_act, _distance, _power, _skew_distance, delta_for_project, lift_chain,
                                lift_constants, project_chain, recurrence_chain, retarget_for_wrap,
                                suspended_boxes)
from app.errors import ConfigError, EscapedRegionError, FloquetError
from app.fibers import EpsilonField, FiberSpace, OperatorMap
from app.fundamental import constants_of
from app.models import THEOREM_IDS, CheckRecord, FundamentalSolution, VerificationReport
from app.suspension import SuspensionMap, canonical_rep, flow_point, suspend_point

logger = logging.getLogger(__name__)

ENDPOINT_TOLERANCE = 1e-9
INVARIANCE_TIME = 0.1


def random_fiber_points(fiber: FiberSpace, count: int, rng: np.random.Generator) -> np.ndarray:
    directions = rng.normal(size=(count, fiber.dimension))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    if fiber.compact:
        return np.array([fiber.normalize(d) for d in directions])
    radii = fiber.radius * 0.9 * rng.uniform(size=count) ** (1.0 / fiber.dimension)
    return directions * radii[:, None]


def _vector(x) -> List[float]:
    return [float(value) for value in np.asarray(x).ravel()]


class VerificationContext:
    """Graphs and components shared by the checks of one (system, fiber, config)"""

    def __init__(self, fs: FundamentalSolution, fiber: FiberSpace, config: RunConfig):
        self.fs = fs
        self.fiber = fiber
        self.config = config
        self.epsilon: EpsilonField = config.epsilon_field()

    def rng(self, label: str) -> np.random.Generator:
        return np.random.default_rng([self.config.seed, zlib.crc32(label.encode("utf-8"))])

    @cached_property
    def monodromy_map(self) -> OperatorMap:
        return OperatorMap(self.fiber, self.fs.monodromy, "g")

    @cached_property
    def flow_map(self) -> SuspensionMap:
        return SuspensionMap(self.fs, self.fiber, 1.0)

    @cached_property
    def fiber_cover(self):
        return build_box_cover(self.fiber, self.config.resolution)

    @cached_property
    def product_cover(self) -> ProductCover:
        return ProductCover(self.fiber_cover, self.config.resolved_base_resolution)

    def _graph(self, cover, step_map):
        return build_transition_graph(cover, step_map, self.epsilon, self.config.samples_per_box,
                                      seed=self.config.seed, include_corners=self.config.include_corners,
                                      workers=self.config.workers)

    @cached_property
    def g_components(self) -> ComponentDecomposition:
        return chain_components(self._graph(self.fiber_cover, self.monodromy_map))

    @cached_property
    def phi_components(self) -> ComponentDecomposition:
        return chain_components(self._graph(self.product_cover, self.flow_map))

    @cached_property
    def suspended_components(self) -> List[frozenset]:
        return [suspended_boxes(self.fs, self.product_cover, core_points(self.g_components, i), self.fiber)
                for i in range(len(self.g_components))]

    @cached_property
    def incidence(self) -> np.ndarray:
        matrix = np.zeros((len(self.g_components), len(self.phi_components)), dtype=bool)
        for a, suspended in enumerate(self.suspended_components):
            for b, component in enumerate(self.phi_components):
                matrix[a, b] = bool(suspended & component.member_boxes)
        return matrix

    @cached_property
    def bijection(self) -> Optional[Dict[int, int]]:
        matrix = self.incidence
        if matrix.shape[0] != matrix.shape[1]:
            return None
        if not (np.all(matrix.sum(axis=0) == 1) and np.all(matrix.sum(axis=1) == 1)):
            return None
        return {int(a): int(np.flatnonzero(matrix[a])[0]) for a in range(matrix.shape[0])}

    def fan_out(self, task: Callable, items: Sequence) -> List:
        """Run independent sub-checks, results in item order"""
        if self.config.workers > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=self.config.workers) as executor:
                return list(executor.map(task, items))
        return [task(item) for item in items]


def _recurrence(step_map, x, tol: float, horizon: int) -> RecurrenceCertificate:
    try:
        return is_recurrent_sample(step_map, x, tol, horizon)
    except EscapedRegionError:
        return RecurrenceCertificate(False, None, None)


def guarded(name: str, inputs: dict, check: Callable[[], CheckRecord]) -> CheckRecord:
    try:
        return check()
    except ConfigError:
        raise
    except FloquetError as e:
        logger.warning(f"Check '{name}' failed with {type(e).__name__}: {e}")
        return CheckRecord(name=name, inputs=inputs, verdict="fail",
                           residual=getattr(e, "residual", None), bound=getattr(e, "bound", None),
                           detail=f"{type(e).__name__}: {e}")


class TheoremCheck:
    theorem_id = ""

    def run(self, context: VerificationContext) -> List[CheckRecord]:
        raise NotImplementedError


class RecurrenceCheck(TheoremCheck):
    """Recurrent points of g suspend to recurrent points of phi, and back"""
    theorem_id = "prop-recurrence"

    def run(self, context):
        fs, fiber, config = context.fs, context.fiber, context.config
        rng = context.rng(self.theorem_id)
        tol, horizon = config.recurrence_tol, config.horizon
        constants = constants_of(fs)
        forward_lipschitz = lift_constants(fs, fiber)[0]
        inverse_lipschitz = fiber.lipschitz(constants.D, constants.C) if fiber.compact else constants.D
        bases = [j / config.base_points for j in range(config.base_points)]

        records = []
        for i, x in enumerate(random_fiber_points(fiber, config.check_points, rng)):
            certificate = _recurrence(context.monodromy_map, x, tol, horizon)
            inputs = {"x": _vector(x)}
            if not certificate.recurrent:
                records.append(CheckRecord(name=f"g-recurrence x{i}", inputs=inputs, tolerance=tol,
                                           verdict="not-observed", detail=f"no return within {horizon} iterates"))
                continue
            k = certificate.return_time
            records.append(CheckRecord(name=f"g-recurrence x{i}", inputs={**inputs, "return_time": k},
                                       residual=certificate.distance, bound=tol, verdict="certified"))
            for s in bases:
                xi = suspend_point(fs, s, x, fiber)
                residual = _skew_distance(fiber, flow_point(fs, float(k), xi, fiber), xi)
                bound = forward_lipschitz * tol
                records.append(CheckRecord(
                    name=f"phi-recurrence of suspended x{i} at s={s:g}",
                    inputs={"s": s, "return_time": k}, residual=residual, bound=bound, tolerance=tol,
                    verdict="certified" if residual < bound else "fail"))

        for i in range(config.check_points):
            s = float(rng.uniform())
            y = random_fiber_points(fiber, 1, rng)[0]
            xi = np.concatenate([[s], y])
            certificate = _recurrence(context.flow_map, xi, tol, horizon)
            inputs = {"s": s, "y": _vector(y)}
            if not certificate.recurrent:
                records.append(CheckRecord(name=f"phi-recurrence p{i}", inputs=inputs, tolerance=tol,
                                           verdict="not-observed", detail=f"no return within {horizon} steps"))
                continue
            k = certificate.return_time
            x = canonical_rep(s, y, fs, fiber).x
            residual = _distance(fiber, _act(fiber, _power(fs, k), x), x)
            bound = inverse_lipschitz * tol
            records.append(CheckRecord(
                name=f"g-recurrence of projected p{i}", inputs={**inputs, "return_time": k},
                residual=residual, bound=bound, tolerance=tol,
                verdict="certified" if residual < bound else "fail"))
        return records


class LiftCheck(TheoremCheck):
    """Box chains inside a component of g lift to chains of phi"""
    theorem_id = "prop-lift"

    def run(self, context):
        decomposition = context.g_components
        if not len(decomposition):
            return [CheckRecord(name="components of g", verdict="not-observed",
                                detail="g has no chain components on this cover")]
        rng = context.rng(self.theorem_id)
        quota = max(1, context.config.check_points // len(decomposition))
        tasks = []
        for component in decomposition:
            members = sorted(component.member_boxes)
            for _ in range(quota):
                a, b = (int(members[j]) for j in rng.integers(0, len(members), size=2))
                u, v = (float(value) for value in rng.uniform(size=2))
                tasks.append((component.index, a, b, u, v))
        return context.fan_out(lambda task: self._lift_one(context, *task), tasks)

    def _lift_one(self, context, index, a, b, u, v) -> CheckRecord:
        fs, fiber = context.fs, context.fiber
        name = f"lift box {a} -> box {b} in component {index}"
        inputs = {"component": index, "a": a, "b": b, "u": u, "v": v}

        def check():
            chain = find_box_chain(context.g_components.graph, a, b)
            if chain is None:
                return CheckRecord(name=name, inputs=inputs, verdict="fail",
                                   detail="no box chain between two boxes of one component")
            points, times = retarget_for_wrap(fs, chain, fiber) if v < u else (chain.points, chain.times)
            residuals = [_distance(fiber, points[i], _act(fiber, _power(fs, int(times[i - 1])), points[i - 1]))
                         for i in range(1, len(points))]
            L, L_u = lift_constants(fs, fiber)
            epsilon = EpsilonField(1.1 * max(max(residuals), 1e-12) * L * L_u / 0.9)
            lifted = lift_chain(fs, chain, u, v, epsilon, fiber, context.config.grid_size)
            start_gap = _skew_distance(fiber, lifted.start, suspend_point(fs, u, chain.start, fiber))
            end_gap = _skew_distance(fiber, lifted.end, suspend_point(fs, v, chain.end, fiber))
            gap = max(start_gap, end_gap)
            return CheckRecord(
                name=name, inputs={**inputs, "steps": chain.length, "epsilon": epsilon.value},
                residual=float(np.max(lifted.residuals / lifted.bounds)), bound=1.0,
                tolerance=ENDPOINT_TOLERANCE,
                verdict="pass" if gap <= ENDPOINT_TOLERANCE else "fail",
                detail=f"endpoint gap {gap:.3e}")

        return guarded(name, inputs, check)


def check_component_invariance(context: VerificationContext, time: float = INVARIANCE_TIME) -> List[CheckRecord]:
    """phi^time of each member box center stays within one diameter of its component"""
    cover = context.product_cover
    records = []
    for component in context.phi_components:
        misses = 0
        for box in sorted(component.member_boxes):
            image = flow_point(context.fs, time, cover.center(box), context.fiber)
            if not set(cover.near(image, cover.diameter(box))) & component.member_boxes:
                misses += 1
        records.append(CheckRecord(
            name=f"invariance of phi-component {component.index} under phi^{time:g}",
            inputs={"boxes": len(component.member_boxes)}, residual=float(misses), bound=0.0,
            verdict="pass" if misses == 0 else "fail"))
    return records


class ChainSetCheck(TheoremCheck):
    """Chain recurrent set of phi^1 = suspension of the chain recurrent set of g, at box level"""
    theorem_id = "thm-chain"

    def run(self, context):
        config = context.config
        phi_boxes = context.phi_components.chain_recurrent_boxes
        suspended = frozenset().union(*context.suspended_components)
        difference = len(phi_boxes ^ suspended)
        union = len(phi_boxes | suspended)
        bound = config.slack * union
        records = [CheckRecord(
            name="chain recurrent boxes of phi^1 vs suspended chain recurrent set of g",
            inputs={"g_boxes": len(context.g_components.chain_recurrent_boxes),
                    "phi_boxes": len(phi_boxes), "suspended_boxes": len(suspended)},
            residual=float(difference), bound=bound, tolerance=config.slack,
            verdict="pass" if difference <= bound else "fail",
            detail=f"symmetric difference {difference} of {union} boxes")]
        records.extend(check_component_invariance(context))

        rng = context.rng(self.theorem_id)
        tasks = []
        for component in context.g_components:
            points = core_points(context.g_components, component.index)
            for j in sorted({0, len(points) // 2}) if len(points) else []:
                tasks.append((component.index, points[j], float(rng.uniform())))
        records.extend(context.fan_out(lambda task: self._round_trip(context, *task), tasks))

        cycles = []
        for component in context.phi_components:
            boxes = sorted(component.member_boxes)
            cycles.extend((component.index, boxes[j]) for j in sorted({0, len(boxes) // 2}))
        records.extend(context.fan_out(lambda task: self._graph_round_trip(context, *task), cycles))
        return records

    def _graph_round_trip(self, context, index, box) -> CheckRecord:
        """Project a closed chain read off the phi^1 transition graph through one box"""
        fs, fiber, config = context.fs, context.fiber, context.config
        name = f"projection of a phi-graph cycle through box {box}"
        inputs = {"phi_component": index, "box": int(box)}

        def check():
            chain = find_box_chain(context.phi_components.graph, box, box, t_min=2 * config.n_min)
            if chain is None:
                return CheckRecord(name=name, inputs=inputs, verdict="not-observed",
                                   detail=f"no cycle through the box for phi^{2 * config.n_min + 1}")
            coarse = []
            for i in range(1, chain.length + 1):
                image = flow_point(fs, float(chain.times[i - 1]), chain.points[i - 1], fiber)
                delta = delta_for_project(fs, context.epsilon, image, config.grid_size, fiber)
                residual = _skew_distance(fiber, chain.points[i], image)
                if not residual < delta:
                    coarse.append((i, residual, delta))
            inputs.update(steps=chain.length, coarse_steps=[i for i, _, _ in coarse])
            if coarse:
                i, residual, delta = coarse[0]
                return CheckRecord(name=name, inputs=inputs, residual=float(residual), bound=float(delta),
                                   verdict="not-observed",
                                   detail=f"{len(coarse)} of {chain.length} steps miss the projection bound, "
                                          f"first at step {i}")
            projected = project_chain(fs, chain, context.epsilon, config.n_min, fiber, config.grid_size)
            worst = int(np.argmax(projected.residuals / projected.bounds))
            return CheckRecord(name=name, inputs={**inputs, "cases": list(projected.cases)},
                               residual=float(projected.residuals[worst]), bound=float(projected.bounds[worst]),
                               verdict="pass")

        return guarded(name, inputs, check)

    def _round_trip(self, context, index, x, s) -> CheckRecord:
        fs, fiber, config = context.fs, context.fiber, context.config
        name = f"projection of a closed phi-chain in component {index}"
        inputs = {"component": index, "x": _vector(x), "s": s}

        def check():
            start = suspend_point(fs, s, x, fiber)
            delta = delta_for_project(fs, context.epsilon, start, config.grid_size, fiber)
            threshold = 0.5 * delta / lift_constants(fs, fiber)[0]
            z, found = np.asarray(x, dtype=float), None
            for q in range(1, config.return_horizon + 1):
                z = _act(fiber, fs.monodromy, z)
                if q > 2 * config.n_min and _distance(fiber, z, x) < threshold:
                    found = q
                    break
            if found is None:
                return CheckRecord(name=name, inputs=inputs, tolerance=threshold, verdict="not-observed",
                                   detail=f"no return within {config.return_horizon} iterates")
            chain = recurrence_chain(fs, x, s, found, context.epsilon, fiber, config.grid_size)
            if not chain.residuals[0] < chain.bounds[0]:
                return CheckRecord(name=name, inputs={**inputs, "return_time": found},
                                   residual=float(chain.residuals[0]), bound=float(chain.bounds[0]),
                                   verdict="not-observed", detail="return not close enough to project")
            projected = project_chain(fs, chain, context.epsilon, config.n_min, fiber, config.grid_size)
            return CheckRecord(name=name, inputs={**inputs, "return_time": found, "case": projected.cases[0]},
                               residual=float(projected.residuals[0]), bound=float(projected.bounds[0]),
                               verdict="pass")

        return guarded(name, inputs, check)


class BijectionCheck(TheoremCheck):
    """Components of g and of phi^1 match one to one"""
    theorem_id = "cor-bijection"

    def run(self, context):
        g_count, phi_count = len(context.g_components), len(context.phi_components)
        matrix = context.incidence
        rows = " / ".join(" ".join(str(int(entry)) for entry in row) for row in matrix) or "empty"
        return [
            CheckRecord(name="component counts", inputs={"g": g_count, "phi": phi_count},
                        residual=float(abs(g_count - phi_count)), bound=0.0,
                        verdict="pass" if g_count == phi_count else "fail"),
            CheckRecord(name="incidence of suspended g-components with phi-components",
                        inputs={"shape": list(matrix.shape)},
                        verdict="pass" if context.bijection is not None else "fail",
                        detail=f"incidence {rows}"),
        ]


class StableSetCheck(TheoremCheck):
    """Stable sets of matched components correspond under suspension"""
    theorem_id = "prop-stable"

    def run(self, context):
        bijection = context.bijection
        if bijection is None:
            return [CheckRecord(name="component bijection", verdict="fail",
                                detail="components of g and phi^1 do not match one to one")]
        fs, fiber, config = context.fs, context.fiber, context.config
        rng = context.rng(self.theorem_id)
        points = list(random_fiber_points(fiber, config.check_points, rng))
        for component in context.g_components:
            core = core_points(context.g_components, component.index)
            if len(core):
                points.append(core[0])

        records = []
        for i, x in enumerate(points):
            s = float(rng.uniform())
            a = stable_set_sample(context.monodromy_map, context.g_components, x, config.iterations)
            b = stable_set_sample(context.flow_map, context.phi_components,
                                  suspend_point(fs, s, x, fiber), config.iterations)
            records.append(self._record(f"stable set of x{i} and its suspension",
                                        {"x": _vector(x), "s": s}, a, b, bijection))
        for i in range(config.check_points):
            s = float(rng.uniform())
            y = random_fiber_points(fiber, 1, rng)[0]
            b = stable_set_sample(context.flow_map, context.phi_components,
                                  np.concatenate([[s], y]), config.iterations)
            a = stable_set_sample(context.monodromy_map, context.g_components,
                                  canonical_rep(s, y, fs, fiber).x, config.iterations)
            records.append(self._record(f"stable set of p{i} and its projection",
                                        {"s": s, "y": _vector(y)}, a, b, bijection))
        return records

    @staticmethod
    def _record(name, inputs, a, b, bijection) -> CheckRecord:
        inputs = {**inputs, "g_component": a, "phi_component": b}
        if a is None and b is None:
            return CheckRecord(name=name, inputs=inputs, verdict="not-observed",
                               detail="orbit tail split between components or left the region")
        if a is None or b is None:
            settled = "phi^1" if a is None else "g"
            return CheckRecord(name=name, inputs=inputs, verdict="fail",
                               detail=f"only the {settled} orbit settled in a component")
        matched = bijection.get(a) == b
        return CheckRecord(name=name, inputs=inputs, verdict="pass" if matched else "fail",
                           detail=f"g-component {a} is matched to phi-component {bijection.get(a)}")


def get_all_checks() -> List[TheoremCheck]:
    return [
        RecurrenceCheck(),
        LiftCheck(),
        ChainSetCheck(),
        BijectionCheck(),
        StableSetCheck()
    ]


def verify_theorem(fs: FundamentalSolution, fiber: FiberSpace, theorem_id: str, config: RunConfig,
                   context: Optional[VerificationContext] = None) -> VerificationReport:
    checks = {check.theorem_id: check for check in get_all_checks()}
    if theorem_id not in checks:
        raise ConfigError(f"unknown theorem '{theorem_id}' (known: {', '.join(THEOREM_IDS)})", field="theorem")
    context = context or VerificationContext(fs, fiber, config)
    records = checks[theorem_id].run(context)
    report = VerificationReport(theorem_id=theorem_id, system=fs.system.label(), fiber=fiber.describe(),
                                seed=config.seed, records=records)
    if report.passed:
        logger.info(report.summary_line())
    else:
        logger.warning(report.summary_line())
    return report


def verify_all(fs: FundamentalSolution, fiber: FiberSpace, config: RunConfig,
               theorem_ids: Optional[Sequence[str]] = None) -> List[VerificationReport]:
    context = VerificationContext(fs, fiber, config)
    return [verify_theorem(fs, fiber, theorem_id, config, context)
            for theorem_id in (theorem_ids or THEOREM_IDS)]

"""
Chain recurrence of a discrete map on a box cover

The transition graph over-approximates the epsilon-chain relation: each box is
sampled, every sample is mapped once and an edge goes to every box meeting the
closed epsilon ball around the image. Nontrivial strongly connected components
stand in for chain transitive components.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import pandas as pd

from app.boxes import BoxCover, halton_offsets
from app.errors import ConfigError, EscapedRegionError
from app.fibers import EpsilonField, ProductSpace
from app.models import DISCRETE, SUSPENSION, ChainWitness, ComponentSet

logger = logging.getLogger(__name__)

ESCAPE = "escape"
MERGE_TOLERANCE = 1e-9
ORACLE_LIMIT = 500


@dataclass(frozen=True, eq=False)
class SampleRecord:
    point: np.ndarray
    # None when the image left the region
    image: Optional[np.ndarray]
    targets: Tuple[int, ...]


class TransitionGraph:
    def __init__(self, cover: BoxCover, step_map, epsilon: EpsilonField, samples_per_box: int,
                 seed: int, include_corners: bool, workers: int, digraph: nx.DiGraph,
                 witnesses: Dict[Tuple[object, object], SampleRecord],
                 records: List[List[SampleRecord]], step: int = 1):
        self.cover = cover
        self.step_map = step_map
        self.epsilon = epsilon
        self.samples_per_box = samples_per_box
        self.seed = seed
        self.include_corners = include_corners
        self.workers = workers
        self.digraph = digraph
        self.witnesses = witnesses
        self.records = records
        self.step = step
        self._iterated: Dict[int, "TransitionGraph"] = {}

    @property
    def space(self):
        return self.cover.space

    @property
    def escaped(self) -> int:
        return sum(1 for box in self.records for record in box if record.image is None)

    def iterated(self, power: int) -> "TransitionGraph":
        """Graph of the map's power on the same cover, epsilon and seed"""
        if power == 1:
            return self
        if power not in self._iterated:
            self._iterated[power] = build_transition_graph(
                self.cover, self.step_map.power(power), self.epsilon, self.samples_per_box,
                seed=self.seed, include_corners=self.include_corners, workers=self.workers, step=power)
        return self._iterated[power]


def _map_box(cover: BoxCover, step_map, epsilon: EpsilonField, box: int, offsets: np.ndarray,
             include_corners: bool) -> List[SampleRecord]:
    space = cover.space
    records = []
    for point in cover.samples(box, offsets, include_corners):
        image = step_map(point)
        if not np.all(np.isfinite(image)) or not space.contains(image):
            records.append(SampleRecord(point=point, image=None, targets=()))
            continue
        radius = epsilon.at(space, image)
        targets = set(cover.near(image, radius))
        home = cover.locate(image)
        if home is not None:
            targets.add(home)
        records.append(SampleRecord(point=point, image=image, targets=tuple(sorted(targets))))
    return records


def build_transition_graph(cover: BoxCover, step_map, epsilon: EpsilonField, samples_per_box: int = 5,
                           seed: int = 42, include_corners: bool = True, workers: int = 1,
                           step: int = 1) -> TransitionGraph:
    if samples_per_box < 1:
        raise ConfigError(f"samples_per_box must be at least 1, got {samples_per_box}",
                          field="samples_per_box")
    offsets = halton_offsets(cover.cell_dimension, samples_per_box - 1, seed)

    def process_chunk(boxes: Sequence[int]) -> List[List[SampleRecord]]:
        return [_map_box(cover, step_map, epsilon, box, offsets, include_corners) for box in boxes]

    chunks = [chunk for chunk in np.array_split(np.arange(cover.count), max(1, workers) * 4) if len(chunk)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(process_chunk, chunks))
    else:
        results = [process_chunk(chunk) for chunk in chunks]
    records = [box_records for chunk_records in results for box_records in chunk_records]

    digraph = nx.DiGraph()
    digraph.add_nodes_from(range(cover.count))
    digraph.add_node(ESCAPE)
    witnesses: Dict[Tuple[object, object], SampleRecord] = {}
    for box, box_records in enumerate(records):
        for record in box_records:
            targets = record.targets if record.image is not None else (ESCAPE,)
            for target in targets:
                if (box, target) not in witnesses:
                    witnesses[(box, target)] = record
                    digraph.add_edge(box, target)

    graph = TransitionGraph(cover, step_map, epsilon, samples_per_box, seed, include_corners,
                            workers, digraph, witnesses, records, step)
    if graph.escaped:
        logger.warning(f"{graph.escaped} samples escaped the region under {step_map.label}")
    logger.info(f"Transition graph of {step_map.label} on {cover.count} boxes has "
                f"{digraph.number_of_edges()} edges")
    return graph


class ComponentDecomposition:
    def __init__(self, graph: TransitionGraph, components: List[ComponentSet]):
        self.graph = graph
        self.cover = graph.cover
        self.components = components
        self._owner = {box: component.index for component in components for box in component.member_boxes}

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def __getitem__(self, index: int) -> ComponentSet:
        return self.components[index]

    @property
    def chain_recurrent_boxes(self) -> FrozenSet[int]:
        return frozenset(self._owner)

    def component_of(self, box: Optional[int]) -> Optional[int]:
        return self._owner.get(box)

    def labels_frame(self) -> pd.DataFrame:
        rows = [{"box_id": box, "component_index": index} for box, index in sorted(self._owner.items())]
        return pd.DataFrame(rows, columns=["box_id", "component_index"])


def chain_components(graph: TransitionGraph) -> ComponentDecomposition:
    digraph = graph.digraph
    nontrivial = []
    for scc in nx.strongly_connected_components(digraph):
        if ESCAPE in scc:
            continue
        if len(scc) > 1 or any(digraph.has_edge(box, box) for box in scc):
            nontrivial.append(frozenset(scc))
    nontrivial.sort(key=min)
    components = [ComponentSet(index=i, member_boxes=boxes) for i, boxes in enumerate(nontrivial)]
    logger.info(f"Found {len(components)} chain components covering "
                f"{sum(len(c.member_boxes) for c in components)} of {graph.cover.count} boxes")
    return ComponentDecomposition(graph, components)


def core_points(decomposition: ComponentDecomposition, index: int) -> np.ndarray:
    """Samples of member boxes whose image lies in a member box of the same component"""
    members = decomposition[index].member_boxes
    cover = decomposition.cover
    points = []
    for box in sorted(members):
        for record in decomposition.graph.records[box]:
            if record.image is not None and cover.locate(record.image) in members:
                points.append(record.point)
    return np.array(points)


def _box_path(digraph: nx.DiGraph, a: int, b: int) -> Optional[List[int]]:
    if a != b:
        try:
            return nx.shortest_path(digraph, a, b)
        except nx.NetworkXNoPath:
            return None
    if digraph.has_edge(a, a):
        return [a, a]
    best = None
    for successor in sorted(s for s in digraph.successors(a) if s != ESCAPE):
        try:
            tail = nx.shortest_path(digraph, successor, a)
        except nx.NetworkXNoPath:
            continue
        if best is None or len(tail) + 1 < len(best):
            best = [a] + tail
    return best


def find_box_chain(graph: TransitionGraph, a: int, b: int, t_min: float = 0.0) -> Optional[ChainWitness]:
    """A chain from a point of box a to box b along graph edges, or None when unreachable

    Points are the samples that realized each edge, so a step misses its image
    by at most epsilon plus the diameter of the target box.
    """
    power = 1 if t_min < 1 else int(math.ceil(t_min)) + 1
    graph = graph.iterated(power)
    path = _box_path(graph.digraph, a, b)
    if path is None:
        return None

    cover, space, step_map = graph.cover, graph.space, graph.step_map
    starts = [graph.witnesses[(path[i], path[i + 1])].point for i in range(len(path) - 1)]
    points = starts + [starts[0] if a == b else cover.center(b)]
    residuals, bounds = [], []
    for i in range(1, len(points)):
        image = step_map(points[i - 1])
        residuals.append(space.distance(points[i], image))
        bounds.append(graph.epsilon.at(space, image) + cover.diameter(path[i]))

    witness = ChainWitness(
        points=np.array(points),
        times=np.full(len(points) - 1, float(power)),
        t_min=t_min,
        residuals=np.array(residuals),
        bounds=np.array(bounds),
        space_tag=SUSPENSION if isinstance(space, ProductSpace) else DISCRETE,
        note="bounds are epsilon plus one box diameter",
    )
    return witness.validate()


def _iterate_checked(step_map, x: np.ndarray, step: int) -> np.ndarray:
    y = step_map(x)
    if not np.all(np.isfinite(y)) or not step_map.space.contains(y):
        norm = float(np.linalg.norm(step_map.space.fiber_part(y)))
        logger.error(f"Orbit left the region at step {step}")
        raise EscapedRegionError(step, norm)
    return y


def brute_force_chain_closure(points: Sequence[np.ndarray], step_map, epsilon: EpsilonField,
                              t_min: float = 0.0, k_max: Optional[int] = None) -> np.ndarray:
    """Transitive closure of p -> q iff d(q, f^k p) < epsilon(f^k p) for some t_min < k <= k_max"""
    points = np.asarray(points, dtype=float)
    if len(points) > ORACLE_LIMIT:
        raise ConfigError(f"the oracle takes at most {ORACLE_LIMIT} points, got {len(points)}",
                          field="points")
    space = step_map.space
    if k_max is None:
        k_max = 3 * int(math.ceil(t_min)) + 10
    k_first = int(math.floor(t_min)) + 1

    relation = nx.DiGraph()
    relation.add_nodes_from(range(len(points)))
    for i, p in enumerate(points):
        image = p
        for k in range(1, k_max + 1):
            image = step_map(image)
            if not np.all(np.isfinite(image)) or not space.contains(image):
                break
            if k < k_first:
                continue
            radius = epsilon.at(space, image)
            for j, q in enumerate(points):
                if space.distance(q, image) < radius:
                    relation.add_edge(i, j)

    closure = nx.transitive_closure(relation, reflexive=False)
    reach = np.zeros((len(points), len(points)), dtype=bool)
    for i, j in closure.edges():
        reach[i, j] = True
    return reach


def omega_limit_sample(step_map, x: np.ndarray, iterations: int, burn_in: int,
                       merge_tolerance: float = MERGE_TOLERANCE) -> np.ndarray:
    """Orbit tail after burn_in, thinned to points at least merge_tolerance apart

    A sampled stand-in for the omega-limit set, not a certified limit set.
    """
    if not iterations > burn_in >= 0:
        raise ConfigError(f"need iterations > burn_in >= 0, got {iterations}, {burn_in}",
                          field="iterations")
    space = step_map.space
    kept: List[np.ndarray] = []
    y = np.asarray(x, dtype=float)
    for k in range(1, iterations + 1):
        y = _iterate_checked(step_map, y, k)
        if k <= burn_in:
            continue
        if all(space.distance(y, z) >= merge_tolerance for z in kept):
            kept.append(y)
    return np.array(kept)


@dataclass(frozen=True)
class RecurrenceCertificate:
    recurrent: bool
    return_time: Optional[int]
    distance: Optional[float]


def is_recurrent_sample(step_map, x: np.ndarray, tol: float, iterations: int) -> RecurrenceCertificate:
    """Smallest 1 <= k <= iterations with d(f^k x, x) < tol

    A negative answer only means no return was observed within the horizon.
    """
    if not tol > 0:
        raise ConfigError(f"recurrence tolerance must be positive, got {tol}", field="recurrence_tol")
    space = step_map.space
    x = np.asarray(x, dtype=float)
    y = x
    for k in range(1, iterations + 1):
        y = _iterate_checked(step_map, y, k)
        gap = space.distance(y, x)
        if gap < tol:
            return RecurrenceCertificate(True, k, gap)
    return RecurrenceCertificate(False, None, None)


def stable_set_sample(step_map, decomposition: ComponentDecomposition, x: np.ndarray,
                      iterations: int) -> Optional[int]:
    """Component holding the whole orbit tail after iterations // 2 steps, else None"""
    space = step_map.space
    cover = decomposition.cover
    burn_in = iterations // 2
    owners = set()
    y = np.asarray(x, dtype=float)
    for k in range(1, iterations + 1):
        y = step_map(y)
        if not np.all(np.isfinite(y)) or not space.contains(y):
            return None
        if k <= burn_in:
            continue
        owner = decomposition.component_of(cover.locate(y))
        if owner is None:
            return None
        owners.add(owner)
        if len(owners) > 1:
            return None
    return owners.pop() if owners else None

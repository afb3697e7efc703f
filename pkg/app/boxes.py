"""
Box covers of a fiber space or of S^1 x F

Every cover parameterizes its boxes by the unit cube [0, 1]^k (embed), so
samples, centers and corners are produced the same way for every geometry.
Boxes are closed: locate() assigns a point on a shared face to the smallest
box index, locate_all() returns every box containing it.
"""

import itertools
import logging
import math
from typing import List, Optional

import numpy as np
import pandas as pd
from scipy.stats import qmc

from app.errors import ConfigError
from app.fibers import (BallFiber, FiberSpace, ProductSpace, ProjectiveFiber, SphereFiber,
                        circle_distance)

logger = logging.getLogger(__name__)

MAX_BOXES = 10_000_000
BOUNDARY_TOLERANCE = 1e-9


def _axis_cell(u: float, resolution: int) -> int:
    return int(min(max(math.ceil(u) - 1, 0), resolution - 1))


def _axis_cells(u: float, resolution: int, periodic: bool = False) -> List[int]:
    """Cells of one axis whose closed extent contains the coordinate u (in cell units)"""
    nearest = round(u)
    if abs(u - nearest) <= BOUNDARY_TOLERANCE:
        cells = [nearest - 1, nearest]
    else:
        cells = [math.floor(u)]
    if periodic:
        return sorted({cell % resolution for cell in cells})
    return [cell for cell in cells if 0 <= cell < resolution]


def halton_offsets(dimension: int, count: int, seed: int) -> np.ndarray:
    if count <= 0:
        return np.empty((0, dimension))
    engine = qmc.Halton(d=dimension, scramble=True, seed=seed)
    return engine.random(count)


class BoxCover:
    cell_dimension = 1

    def __init__(self, space, resolution: int, count: int):
        if resolution < 2:
            raise ConfigError(f"resolution must be at least 2, got {resolution}", field="resolution")
        if count > MAX_BOXES:
            raise ConfigError(f"cover would have {count} boxes (limit {MAX_BOXES})", field="resolution")
        self.space = space
        self.resolution = resolution
        self.count = count

    def embed(self, box: int, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def locate(self, point: np.ndarray) -> Optional[int]:
        raise NotImplementedError

    def locate_all(self, point: np.ndarray) -> List[int]:
        raise NotImplementedError

    def near(self, point: np.ndarray, radius: float) -> List[int]:
        """Boxes meeting the closed ball of the given radius (may over-approximate)"""
        raise NotImplementedError

    def diameter(self, box: int) -> float:
        raise NotImplementedError

    def center(self, box: int) -> np.ndarray:
        return self.embed(box, np.full(self.cell_dimension, 0.5))

    def samples(self, box: int, offsets: np.ndarray, include_corners: bool = True) -> np.ndarray:
        units = [np.full(self.cell_dimension, 0.5)]
        if include_corners:
            units.extend(np.array(corner, dtype=float)
                         for corner in itertools.product([0.0, 1.0], repeat=self.cell_dimension))
        units.extend(offsets)
        return np.array([self.embed(box, u) for u in units])

    def geometry_frame(self) -> pd.DataFrame:
        rows = []
        for box in range(self.count):
            center = self.center(box)
            row = {"box_id": box}
            row.update({f"c{i + 1}": value for i, value in enumerate(center)})
            row["radius"] = 0.5 * self.diameter(box)
            rows.append(row)
        return pd.DataFrame(rows)


class GridCover(BoxCover):
    """Axis-aligned cells of [-R, R]^n that meet the ball of radius R"""

    def __init__(self, fiber: BallFiber, resolution: int):
        n = fiber.dimension
        super().__init__(fiber, resolution, 0)
        total = resolution ** n
        if total > MAX_BOXES:
            raise ConfigError(f"cover would have {total} boxes (limit {MAX_BOXES})", field="resolution")
        self.cell_dimension = n
        self.width = 2.0 * fiber.radius / resolution
        self.lower = -fiber.radius

        grid = np.stack(np.unravel_index(np.arange(total), (resolution,) * n), axis=1)
        low = self.lower + grid * self.width
        closest = np.clip(0.0, low, low + self.width)
        keep = np.linalg.norm(closest, axis=1) <= fiber.radius * (1 + 1e-12)
        self.cells = grid[keep]
        self.index = np.full(total, -1, dtype=int)
        self.index[np.flatnonzero(keep)] = np.arange(len(self.cells))
        self.count = len(self.cells)

    def _id(self, cell) -> int:
        return int(self.index[np.ravel_multi_index(tuple(cell), (self.resolution,) * self.cell_dimension)])

    def embed(self, box, u):
        """Point of the closed cell; parts outside the ball are pulled back onto its boundary sphere"""
        low = self.lower + self.cells[box] * self.width
        point = low + np.asarray(u) * self.width
        radius = self.space.radius
        if np.linalg.norm(point) <= radius:
            return point
        # walk from the cell point nearest the origin towards the sample and stop on the sphere
        inner = np.clip(0.0, low, low + self.width)
        direction = point - inner
        a = float(direction @ direction)
        b = 2.0 * float(inner @ direction)
        c = min(float(inner @ inner) - radius * radius, 0.0)
        step = (-b + math.sqrt(b * b - 4.0 * a * c)) / (2.0 * a)
        return inner + min(max(step, 0.0), 1.0) * direction

    def locate(self, point):
        if not self.space.contains(point):
            return None
        u = (np.asarray(point) - self.lower) / self.width
        box = self._id([_axis_cell(value, self.resolution) for value in u])
        return box if box >= 0 else None

    def locate_all(self, point):
        if not self.space.contains(point):
            return []
        u = (np.asarray(point) - self.lower) / self.width
        axes = [_axis_cells(value, self.resolution) for value in u]
        boxes = {self._id(cell) for cell in itertools.product(*axes)}
        return sorted(box for box in boxes if box >= 0)

    def near(self, point, radius):
        point = np.asarray(point)
        axes = []
        for value in point:
            first = max(math.ceil((value - radius - self.lower) / self.width - 1), 0)
            last = min(math.floor((value + radius - self.lower) / self.width), self.resolution - 1)
            if first > last:
                return []
            axes.append(range(first, last + 1))
        boxes = []
        for cell in itertools.product(*axes):
            box = self._id(cell)
            if box < 0:
                continue
            low = self.lower + np.array(cell) * self.width
            closest = np.clip(point, low, low + self.width)
            if np.linalg.norm(point - closest) <= radius:
                boxes.append(box)
        return sorted(boxes)

    def diameter(self, box):
        return self.width * math.sqrt(self.cell_dimension)


class AngularCover(BoxCover):
    """Equal angular arcs of the circle: period 2 pi on the sphere, pi on projective space"""

    def __init__(self, fiber: SphereFiber, resolution: int):
        if fiber.dimension != 2:
            raise ConfigError("angular covers need a fiber in R^2", field="fiber")
        super().__init__(fiber, resolution, resolution)
        self.period = math.pi if isinstance(fiber, ProjectiveFiber) else 2.0 * math.pi
        self.width = self.period / resolution

    def angle(self, point) -> float:
        theta = math.atan2(point[1], point[0]) % self.period
        return 0.0 if theta >= self.period else theta

    def embed(self, box, u):
        theta = (box + float(u[0])) * self.width
        return self.space.normalize(np.array([math.cos(theta), math.sin(theta)]))

    def locate(self, point):
        if not self.space.contains(point):
            return None
        return _axis_cell(self.angle(point) / self.width, self.resolution)

    def locate_all(self, point):
        if not self.space.contains(point):
            return []
        return _axis_cells(self.angle(point) / self.width, self.resolution, periodic=True)

    def near(self, point, radius):
        alpha = 2.0 * math.asin(min(1.0, radius / 2.0))
        if alpha >= self.period / 2.0:
            return list(range(self.count))
        theta = self.angle(point)
        first = math.ceil((theta - alpha) / self.width - 1)
        last = math.floor((theta + alpha) / self.width)
        return sorted({cell % self.resolution for cell in range(first, last + 1)})

    def diameter(self, box):
        return 2.0 * math.sin(min(self.width, math.pi) / 2.0)


class FaceCover(BoxCover):
    """Gnomonic charts on the faces of the cube [-1, 1]^n, n >= 3

    A sphere uses all 2n faces; projective space uses the n faces with a
    positive dominant coordinate.
    """

    def __init__(self, fiber: SphereFiber, resolution: int):
        n = fiber.dimension
        if n < 3:
            raise ConfigError("face covers need a fiber in R^n with n >= 3", field="fiber")
        self.projective = isinstance(fiber, ProjectiveFiber)
        self.faces = [(axis, 1.0) for axis in range(n)] if self.projective else \
            [(axis, sign) for axis in range(n) for sign in (1.0, -1.0)]
        self.per_face = resolution ** (n - 1)
        super().__init__(fiber, resolution, len(self.faces) * self.per_face)
        self.cell_dimension = n - 1
        self.width = 2.0 / resolution

        self.centers = np.array([self.embed(box, np.full(n - 1, 0.5)) for box in range(self.count)])
        self.radii = np.empty(self.count)
        for box in range(self.count):
            corners = [self.embed(box, np.array(c, dtype=float))
                       for c in itertools.product([0.0, 1.0], repeat=n - 1)]
            self.radii[box] = max(self.space.distance(self.centers[box], c) for c in corners)

    def _split(self, box):
        face, cell = divmod(box, self.per_face)
        return face, np.unravel_index(cell, (self.resolution,) * self.cell_dimension)

    def embed(self, box, u):
        face, cell = self._split(box)
        axis, sign = self.faces[face]
        chart = -1.0 + (np.array(cell) + np.asarray(u)) * self.width
        vector = np.insert(chart, axis, sign)
        return self.space.normalize(vector)

    def _charts(self, point):
        point = np.asarray(point, dtype=float)
        magnitudes = np.abs(point)
        top = magnitudes.max()
        charts = []
        for axis in np.flatnonzero(magnitudes >= top * (1 - 1e-12)):
            sign = 1.0 if point[axis] > 0 else -1.0
            if self.projective:
                face, oriented = int(axis), point * sign
            else:
                face, oriented = self.faces.index((int(axis), sign)), point
            chart = np.delete(oriented, axis) / abs(point[axis])
            charts.append((face, (chart + 1.0) / self.width))
        return charts

    def locate(self, point):
        if not self.space.contains(point):
            return None
        face, u = self._charts(point)[0]
        cell = [_axis_cell(value, self.resolution) for value in u]
        return face * self.per_face + int(np.ravel_multi_index(cell, (self.resolution,) * self.cell_dimension))

    def locate_all(self, point):
        if not self.space.contains(point):
            return []
        boxes = set()
        for face, u in self._charts(point):
            axes = [_axis_cells(value, self.resolution) for value in u]
            for cell in itertools.product(*axes):
                boxes.add(face * self.per_face +
                          int(np.ravel_multi_index(cell, (self.resolution,) * self.cell_dimension)))
        return sorted(boxes)

    def near(self, point, radius):
        gaps = np.linalg.norm(self.centers - point, axis=1)
        if self.projective:
            gaps = np.minimum(gaps, np.linalg.norm(self.centers + point, axis=1))
        return [int(box) for box in np.flatnonzero(gaps <= radius + self.radii)]

    def diameter(self, box):
        return 2.0 * float(self.radii[box])


class ProductCover(BoxCover):
    """Cells [j/M, (j+1)/M] x (fiber box); box id = j * F + b"""

    def __init__(self, fiber_cover: BoxCover, base_resolution: int):
        self.fiber_cover = fiber_cover
        self.base_resolution = base_resolution
        if base_resolution < 2:
            raise ConfigError(f"base resolution must be at least 2, got {base_resolution}",
                              field="base_resolution")
        super().__init__(ProductSpace(fiber_cover.space), fiber_cover.resolution,
                         base_resolution * fiber_cover.count)
        self.cell_dimension = 1 + fiber_cover.cell_dimension

    def split(self, box: int):
        return divmod(box, self.fiber_cover.count)

    def compose(self, base_cell: int, fiber_box: int) -> int:
        return base_cell * self.fiber_cover.count + fiber_box

    def embed(self, box, u):
        j, b = self.split(box)
        s = ((j + float(u[0])) / self.base_resolution) % 1.0
        return np.concatenate([[s], self.fiber_cover.embed(b, np.asarray(u)[1:])])

    def locate(self, point):
        fiber_box = self.fiber_cover.locate(point[1:])
        if fiber_box is None:
            return None
        return self.compose(_axis_cell(point[0] * self.base_resolution, self.base_resolution), fiber_box)

    def locate_all(self, point):
        fiber_boxes = self.fiber_cover.locate_all(point[1:])
        base_cells = _axis_cells(point[0] * self.base_resolution, self.base_resolution, periodic=True)
        return sorted(self.compose(j, b) for j in base_cells for b in fiber_boxes)

    def _base_gap(self, s: float, j: int) -> float:
        low, high = j / self.base_resolution, (j + 1) / self.base_resolution
        if low <= s <= high:
            return 0.0
        return min(circle_distance(s, low), circle_distance(s, high))

    def near(self, point, radius):
        s = float(point[0])
        M = self.base_resolution
        if 2.0 * radius >= 1.0:
            candidates = range(M)
        else:
            candidates = {j % M for j in range(math.floor((s - radius) * M) - 1,
                                               math.floor((s + radius) * M) + 2)}
        boxes = []
        for j in sorted(candidates):
            gap = self._base_gap(s, j)
            if gap > radius:
                continue
            boxes.extend(self.compose(j, b) for b in self.fiber_cover.near(point[1:], radius - gap))
        return sorted(boxes)

    def diameter(self, box):
        _, b = self.split(box)
        return 1.0 / self.base_resolution + self.fiber_cover.diameter(b)


def build_box_cover(fiber: FiberSpace, resolution: int) -> BoxCover:
    if isinstance(fiber, BallFiber):
        cover = GridCover(fiber, resolution)
    elif fiber.dimension == 2:
        cover = AngularCover(fiber, resolution)
    elif fiber.dimension >= 3:
        cover = FaceCover(fiber, resolution)
    else:
        raise ConfigError(f"no cover for a {fiber.kind} fiber in R^{fiber.dimension}", field="fiber")
    logger.info(f"Built {type(cover).__name__} of {fiber.describe()} with {cover.count} boxes")
    return cover


def build_product_cover(fiber: FiberSpace, resolution: int, base_resolution: int) -> ProductCover:
    return ProductCover(build_box_cover(fiber, resolution), base_resolution)

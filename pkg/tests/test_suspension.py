import math

import numpy as np
import pytest

from app.errors import ConfigError
from app.fibers import ProjectiveFiber, SphereFiber
from app.fundamental import constants_of, evaluate_g
from app.models import SkewPoint
from app.suspension import (OPERATOR_CACHE_SIZE, SuspensionMap, canonical_base, canonical_rep, decompose_time,
                            flow_point, phi, skew_metric, suspend_point, suspend_set)


def test_canonical_base():
    assert canonical_base(1.25) == pytest.approx(0.25)
    assert canonical_base(-0.25) == pytest.approx(0.75)
    assert canonical_base(-1e-18) == 0.0


def test_canonical_rep_inverts_suspension(mathieu_fs):
    x = np.array([0.3, -0.7])
    point = suspend_point(mathieu_fs, 0.4, x)
    rep = canonical_rep(point[0], point[1:], mathieu_fs)
    assert rep.s == pytest.approx(0.4)
    assert np.allclose(rep.x, x, atol=1e-10)


def test_canonical_rep_of_shifted_base(hyperbolic_fs):
    # (1.5, y) is the point (0.5, y) of the circle
    rep = canonical_rep(1.5, np.array([1.0, 1.0]), hyperbolic_fs)
    assert rep.s == pytest.approx(0.5)
    assert np.allclose(rep.x, [math.exp(-0.5), math.exp(0.5)], atol=1e-8)


@pytest.mark.parametrize("s, t", [(0.0, 0.0), (0.3, 0.5), (0.7, 0.5), (0.9, 2.35), (0.25, 3.75)])
def test_decompose_time(s, t):
    split = decompose_time(s, t)
    assert split.tau + split.n == pytest.approx(t)
    assert 0.0 <= s + split.tau < 1.0


def test_decompose_time_rejects_negative_time():
    with pytest.raises(ValueError):
        decompose_time(0.5, -1.0)


def test_flow_group_property(mathieu_fs):
    start = np.array([0.6, 1.0, -0.5])
    once = flow_point(mathieu_fs, 0.7 + 1.55, start)
    twice = flow_point(mathieu_fs, 1.55, flow_point(mathieu_fs, 0.7, start))
    assert once[0] == pytest.approx(twice[0])
    assert np.allclose(once[1:], twice[1:], atol=1e-9)


def test_flow_at_time_zero_is_identity(mathieu_fs):
    start = np.array([0.6, 1.0, -0.5])
    assert np.allclose(flow_point(mathieu_fs, 0.0, start), start)


def test_flow_follows_the_solution(mathieu_fs):
    x = np.array([0.2, 0.9])
    start = suspend_point(mathieu_fs, 0.0, x)
    image = flow_point(mathieu_fs, 2.3, start)
    assert image[0] == pytest.approx(0.3)
    assert np.allclose(image[1:], evaluate_g(mathieu_fs, 2.3) @ x, atol=1e-9)


def test_backward_flow(mathieu_fs):
    start = np.array([0.2, 1.0, 0.5])
    back = flow_point(mathieu_fs, -0.5, start)
    assert back[0] == pytest.approx(0.7)
    assert np.allclose(flow_point(mathieu_fs, 0.5, back), start, atol=1e-9)


def test_phi_and_skew_metric_on_skew_points(full_rotation_fs):
    sphere = SphereFiber(2)
    p = SkewPoint(0.1, np.array([1.0, 0.0]))
    q = phi(full_rotation_fs, 1.0, p, sphere)
    assert q.s == pytest.approx(0.1)
    assert skew_metric(p, q, sphere) < 1e-8


def test_suspend_set_rows(hyperbolic_fs):
    plane = ProjectiveFiber(2)
    E = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    suspension = suspend_set(hyperbolic_fs, E, 4, plane)
    frame = suspension.to_frame()
    assert list(frame.columns) == ["s", "x1", "x2"]
    assert len(frame) == 8
    assert np.allclose(frame[["x1", "x2"]].to_numpy()[:2], [[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ConfigError):
        suspend_set(hyperbolic_fs, E, 1, plane)


def test_suspension_map_conjugates_the_monodromy(hyperbolic_fs):
    plane = ProjectiveFiber(2)
    step = SuspensionMap(hyperbolic_fs, plane)
    x = plane.normalize(np.array([1.0, 2.0]))
    start = suspend_point(hyperbolic_fs, 0.35, x, plane)
    expected = suspend_point(hyperbolic_fs, 0.35, plane.act(hyperbolic_fs.monodromy, x), plane)
    assert np.allclose(step(start), expected, atol=1e-9)
    assert step.power(3).time == 3.0


def test_semigroup_on_random_points(mathieu_fs):
    rng = np.random.default_rng(7)
    for _ in range(100):
        p = SkewPoint(float(rng.uniform()), rng.normal(size=2))
        t, r = rng.uniform(0.0, 2.0, size=2)
        composed = phi(mathieu_fs, t, phi(mathieu_fs, r, p))
        assert skew_metric(composed, phi(mathieu_fs, t + r, p)) <= 1e-6


@pytest.mark.parametrize("name", ["zero", "rotation", "hyperbolic"])
def test_skew_lipschitz_for_constant_coefficients(name, builtin_solutions):
    fs = builtin_solutions[name]
    C = constants_of(fs).C
    rng = np.random.default_rng(11)
    for _ in range(500):
        s, r, t = rng.integers(0, 16, size=3) / 16
        x, y = (v * rng.uniform() ** 0.5 / np.linalg.norm(v) for v in rng.normal(size=(2, 2)))
        p, q = SkewPoint(float(s), x), SkewPoint(float(r), y)
        images = phi(fs, float(t), p), phi(fs, float(t), q)
        assert skew_metric(*images) <= C * skew_metric(p, q) + 1e-12


@pytest.mark.parametrize("fiber", [None, SphereFiber(2), ProjectiveFiber(2)])
def test_skew_metric_axioms(fiber):
    rng = np.random.default_rng(3)
    for _ in range(200):
        points = []
        for _ in range(3):
            x = rng.normal(size=2)
            points.append(SkewPoint(float(rng.uniform()), fiber.normalize(x) if fiber is not None else x))
        p, q, w = points
        assert skew_metric(p, p, fiber) == 0.0
        assert skew_metric(p, q, fiber) > 0.0
        assert skew_metric(p, q, fiber) == pytest.approx(skew_metric(q, p, fiber))
        assert skew_metric(p, w, fiber) <= skew_metric(p, q, fiber) + skew_metric(q, w, fiber) + 1e-12


def test_suspension_map_operator_cache_is_bounded(hyperbolic_fs):
    plane = ProjectiveFiber(2)
    step = SuspensionMap(hyperbolic_fs, plane)
    for s in np.linspace(0.0, 1.0, OPERATOR_CACHE_SIZE + 50, endpoint=False):
        step(np.array([s, 1.0, 0.0]))
    info = step.operator.cache_info()
    assert info.maxsize == OPERATOR_CACHE_SIZE
    assert info.currsize == OPERATOR_CACHE_SIZE
    step(np.array([s, 0.0, 1.0]))
    assert step.operator.cache_info().hits == info.hits + 1

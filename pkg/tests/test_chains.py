import math

import numpy as np
import pytest

from app.boxes import build_box_cover
from app.chains import (ESCAPE, brute_force_chain_closure, build_transition_graph, chain_components, core_points,
                        find_box_chain, is_recurrent_sample, omega_limit_sample, stable_set_sample)
from app.errors import ConfigError, EscapedRegionError
from app.fibers import BallFiber, EpsilonField, OperatorMap, ProjectiveFiber, SphereFiber
from app.fundamental import integrate_fundamental
from app.systems import get_builtin

EPSILON = EpsilonField(1e-2)


@pytest.fixture(scope="module")
def hyperbolic_graph(hyperbolic_fs):
    plane = ProjectiveFiber(2)
    cover = build_box_cover(plane, 64)
    return build_transition_graph(cover, OperatorMap(plane, hyperbolic_fs.monodromy, "g"), EPSILON)


def test_identity_on_the_circle_is_one_component(full_rotation_fs):
    circle = SphereFiber(2)
    cover = build_box_cover(circle, 64)
    graph = build_transition_graph(cover, OperatorMap(circle, full_rotation_fs.monodromy), EPSILON)
    decomposition = chain_components(graph)
    assert len(decomposition) == 1
    assert decomposition.chain_recurrent_boxes == frozenset(range(64))


def test_projective_hyperbolic_has_two_components(hyperbolic_graph):
    decomposition = chain_components(hyperbolic_graph)
    assert len(decomposition) == 2
    assert decomposition[0].member_boxes == frozenset({0, 63})
    assert decomposition[1].member_boxes == frozenset({31, 32})
    assert decomposition.component_of(32) == 1
    assert decomposition.component_of(10) is None


def test_graph_does_not_depend_on_worker_count(hyperbolic_fs, hyperbolic_graph):
    plane = ProjectiveFiber(2)
    parallel = build_transition_graph(hyperbolic_graph.cover, OperatorMap(plane, hyperbolic_fs.monodromy, "g"),
                                      EPSILON, workers=4)
    assert sorted(parallel.digraph.edges(), key=str) == sorted(hyperbolic_graph.digraph.edges(), key=str)


def test_labels_frame(hyperbolic_graph):
    frame = chain_components(hyperbolic_graph).labels_frame()
    assert list(frame.columns) == ["box_id", "component_index"]
    assert frame["box_id"].tolist() == [0, 31, 32, 63]
    assert frame["component_index"].tolist() == [0, 1, 1, 0]


def test_escaping_samples_feed_the_escape_node(hyperbolic_fs):
    ball = BallFiber(2)
    cover = build_box_cover(ball, 8)
    graph = build_transition_graph(cover, OperatorMap(ball, hyperbolic_fs.monodromy, "g"), EPSILON)
    assert graph.escaped > 0
    assert graph.digraph.in_degree(ESCAPE) > 0
    decomposition = chain_components(graph)
    # only the boxes around the fixed origin survive
    origin_boxes = set(cover.locate_all(np.zeros(2)))
    assert decomposition.chain_recurrent_boxes <= frozenset(origin_boxes | set(cover.near(np.zeros(2), 0.3)))
    assert origin_boxes <= decomposition.chain_recurrent_boxes


def test_samples_per_box_must_be_positive(hyperbolic_graph):
    with pytest.raises(ConfigError):
        build_transition_graph(hyperbolic_graph.cover, hyperbolic_graph.step_map, EPSILON, samples_per_box=0)


def test_core_points_map_back_into_their_component(hyperbolic_graph):
    decomposition = chain_components(hyperbolic_graph)
    cover, step_map = hyperbolic_graph.cover, hyperbolic_graph.step_map
    for component in decomposition:
        points = core_points(decomposition, component.index)
        assert len(points) > 0
        for point in points:
            assert cover.locate(step_map(point)) in component.member_boxes


def test_box_chain_inside_a_component(hyperbolic_graph):
    chain = find_box_chain(hyperbolic_graph, 0, 63)
    assert chain is not None
    assert np.all(chain.residuals < chain.bounds)
    assert hyperbolic_graph.cover.locate(chain.start) == 0


def test_closed_box_chain(hyperbolic_graph):
    chain = find_box_chain(hyperbolic_graph, 31, 31)
    assert chain is not None
    assert np.array_equal(chain.start, chain.end)


def test_unreachable_boxes_have_no_chain(hyperbolic_graph):
    assert find_box_chain(hyperbolic_graph, 0, 31) is None


def test_box_chain_with_large_minimum_time(hyperbolic_graph):
    chain = find_box_chain(hyperbolic_graph, 0, 0, t_min=2.5)
    assert chain is not None
    assert np.all(chain.times == 4.0)


def test_brute_force_closure_on_a_rotation():
    fs = integrate_fundamental(get_builtin("rotation", {"omega": math.pi / 2}), 256)
    circle = SphereFiber(2)
    step_map = OperatorMap(circle, fs.monodromy)
    points = [np.array([math.cos(a), math.sin(a)]) for a in (0.0, math.pi / 2, math.pi, 0.1)]
    reach = brute_force_chain_closure(points, step_map, EPSILON)
    assert reach[0, 1] and reach[1, 0] and reach[0, 0]
    assert not reach[0, 3]


def test_brute_force_closure_point_limit(hyperbolic_graph):
    points = [np.array([1.0, 0.0])] * 501
    with pytest.raises(ConfigError):
        brute_force_chain_closure(points, hyperbolic_graph.step_map, EPSILON)


def test_oracle_recurrence_is_contained_in_the_graph(hyperbolic_graph):
    cover = hyperbolic_graph.cover
    recurrent = chain_components(hyperbolic_graph).chain_recurrent_boxes
    centers = [cover.center(box) for box in range(cover.count)]
    reach = brute_force_chain_closure(centers, hyperbolic_graph.step_map, EPSILON, k_max=1)
    for box in range(cover.count):
        if reach[box, box]:
            assert box in recurrent, f"box {box} is recurrent for the oracle only"


def test_omega_limit_of_a_period_four_orbit():
    fs = integrate_fundamental(get_builtin("rotation", {"omega": math.pi / 2}), 256)
    circle = SphereFiber(2)
    tail = omega_limit_sample(OperatorMap(circle, fs.monodromy), np.array([1.0, 0.0]), 40, 20, 1e-6)
    assert len(tail) == 4


def test_recurrence_certificate():
    fs = integrate_fundamental(get_builtin("rotation", {"omega": 2 * math.pi * 3 / 7}), 1024)
    circle = SphereFiber(2)
    certificate = is_recurrent_sample(OperatorMap(circle, fs.monodromy), np.array([0.6, 0.8]), 1e-9, 64)
    assert certificate.recurrent
    assert certificate.return_time == 7
    assert certificate.distance < 1e-9


def test_no_return_is_not_a_certificate(hyperbolic_fs):
    plane = ProjectiveFiber(2)
    x = plane.normalize(np.array([1.0, 1.0]))
    certificate = is_recurrent_sample(OperatorMap(plane, hyperbolic_fs.monodromy), x, 1e-9, 20)
    assert not certificate.recurrent
    assert certificate.return_time is None


def test_escape_raises_for_recurrence_and_omega_limits(hyperbolic_fs):
    ball = BallFiber(2)
    step_map = OperatorMap(ball, hyperbolic_fs.monodromy)
    with pytest.raises(EscapedRegionError):
        is_recurrent_sample(step_map, np.array([0.5, 0.0]), 1e-9, 10)
    with pytest.raises(EscapedRegionError):
        omega_limit_sample(step_map, np.array([0.5, 0.0]), 10, 2)


def test_stable_sets_of_the_hyperbolic_components(hyperbolic_graph):
    decomposition = chain_components(hyperbolic_graph)
    step_map = hyperbolic_graph.step_map
    plane = ProjectiveFiber(2)
    assert stable_set_sample(step_map, decomposition, plane.normalize(np.array([1.0, 0.7])), 200) == 0
    assert stable_set_sample(step_map, decomposition, np.array([0.0, 1.0]), 200) == 1


def test_stable_set_of_an_escaping_orbit_is_none(hyperbolic_fs):
    ball = BallFiber(2)
    cover = build_box_cover(ball, 8)
    step_map = OperatorMap(ball, hyperbolic_fs.monodromy)
    decomposition = chain_components(build_transition_graph(cover, step_map, EPSILON))
    assert stable_set_sample(step_map, decomposition, np.array([0.5, 0.0]), 50) is None


def test_golden_rotation_of_the_circle_is_one_component():
    circle = SphereFiber(2)
    fs = integrate_fundamental(get_builtin("rotation", {"omega": 2 * math.pi * 0.381966}), 1024)
    graph = build_transition_graph(build_box_cover(circle, 64), OperatorMap(circle, fs.monodromy), EPSILON)
    decomposition = chain_components(graph)
    assert len(decomposition) == 1
    assert decomposition.chain_recurrent_boxes == frozenset(range(64))


@pytest.mark.parametrize("include_corners, expected", [(False, 4), (True, 1)])
def test_identity_on_four_intervals(include_corners, expected):
    segment = BallFiber(1)
    cover = build_box_cover(segment, 4)
    graph = build_transition_graph(cover, OperatorMap(segment, np.eye(1)), EPSILON, samples_per_box=1,
                                   include_corners=include_corners)
    assert all(graph.digraph.has_edge(box, box) for box in range(4))
    decomposition = chain_components(graph)
    assert len(decomposition) == expected
    assert decomposition.chain_recurrent_boxes == frozenset(range(4))


def test_larger_epsilon_only_adds_edges_and_merges_components(hyperbolic_fs, hyperbolic_graph):
    plane = ProjectiveFiber(2)
    coarse = build_transition_graph(hyperbolic_graph.cover, OperatorMap(plane, hyperbolic_fs.monodromy, "g"),
                                    EpsilonField(5e-2))
    assert set(hyperbolic_graph.digraph.edges()) <= set(coarse.digraph.edges())
    fine_components, coarse_components = chain_components(hyperbolic_graph), chain_components(coarse)
    assert fine_components.chain_recurrent_boxes <= coarse_components.chain_recurrent_boxes
    for component in fine_components:
        owners = {coarse_components.component_of(box) for box in component.member_boxes}
        assert len(owners) == 1 and None not in owners

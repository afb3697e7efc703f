import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from app.errors import ConfigError
from app.fundamental import integrate_fundamental
from app.models import PeriodicSystem
from app.systems import get_all_builtins, get_builtin, normalize_period, shifted, system_from_definition


def test_registry_lists_the_four_builtins():
    assert [builtin.name for builtin in get_all_builtins()] == ["zero", "rotation", "hyperbolic", "mathieu"]


def test_rotation_parameter_passes_through():
    system = get_builtin("rotation", {"omega": 6.283185307})
    assert system.A0[1, 0] == pytest.approx(6.283185307)
    assert system.A0[0, 1] == pytest.approx(-6.283185307)


def test_unknown_builtin_and_parameter_are_config_errors():
    with pytest.raises(ConfigError):
        get_builtin("duffing")
    with pytest.raises(ConfigError) as excinfo:
        get_builtin("hyperbolic", {"omega": 1.0})
    assert excinfo.value.field == "omega"


def test_mathieu_coefficient_matches_the_equation():
    system = get_builtin("mathieu", {"a": 2.0, "q": 0.5})
    X = system.coefficient(0.0)
    assert np.allclose(X, [[0.0, 1.0], [-(2.0 + 1.0), 0.0]])
    assert np.allclose(system.coefficient(0.25), [[0.0, 1.0], [-2.0, 0.0]])


def test_coefficient_is_periodic():
    system = get_builtin("mathieu")
    for t in np.linspace(0, 1, 7):
        assert np.allclose(system.coefficient(t + 1.0), system.coefficient(t))


def test_row_length_error_names_the_row():
    with pytest.raises(ConfigError) as excinfo:
        system_from_definition({"kind": "constant", "dimension": 2, "A0": [[1, 0], [0, 1, 2]]})
    assert excinfo.value.field == "A0[1]"
    assert "row 1" in str(excinfo.value)


def test_definition_pads_missing_sine_terms():
    system = system_from_definition({"kind": "trig", "dimension": 1, "A0": [[0.0]], "Ak": [[[1.0]]]})
    assert len(system.Ak) == len(system.Bk) == 1
    assert np.allclose(system.Bk[0], 0.0)


def test_unit_period_is_left_alone():
    system = get_builtin("hyperbolic")
    assert normalize_period(system) is system


def test_constant_system_of_period_two_doubles_its_coefficient():
    A = np.array([[0.1, 0.2], [0.3, -0.4]])
    system = PeriodicSystem(dimension=2, period=2.0, A0=A, kind="constant")
    normalized = normalize_period(system)
    assert normalized.period == 1.0
    assert np.allclose(normalized.A0, 2 * A)


def test_normalized_system_has_the_same_monodromy():
    A0 = np.array([[0.0, 1.0], [-1.0, -0.1]])
    A1 = np.array([[0.0, 0.0], [0.3, 0.0]])
    system = PeriodicSystem(dimension=2, period=2 * math.pi, A0=A0, Ak=(A1,), Bk=(np.zeros((2, 2)),))

    def rhs(t, y):
        return (system.coefficient(t) @ y.reshape(2, 2)).ravel()

    reference = solve_ivp(rhs, (0.0, 2 * math.pi), np.eye(2).ravel(), rtol=1e-12, atol=1e-13).y[:, -1]
    fs = integrate_fundamental(normalize_period(system), 1024, with_constants=False)
    assert np.max(np.abs(fs.monodromy - reference.reshape(2, 2))) < 1e-8


def test_shifted_system_evaluates_x_at_t_plus_s():
    system = get_builtin("mathieu", {"a": 1.0, "q": 0.4})
    moved = shifted(system, 0.37)
    for t in (0.0, 0.2, 0.9):
        assert np.allclose(moved.coefficient(t), system.coefficient(t + 0.37), atol=1e-14)

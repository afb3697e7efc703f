import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp as reference_ivp
from scipy.linalg import expm

from app.errors import ConditioningError, ConfigError
from app.fundamental import (estimate_constants, evaluate_g, floquet_multipliers, integrate_fundamental,
                             inverse_g, inverse_g_diagnostic, operator_norm, sample_trajectory, solve_ivp)
from app.models import PeriodicSystem
from app.systems import get_builtin


def test_zero_system_stays_at_identity():
    fs = integrate_fundamental(get_builtin("zero"), 16)
    assert all(np.array_equal(sample, np.eye(2)) for sample in fs.samples)
    assert np.array_equal(fs.monodromy, np.eye(2))


def test_steps_must_be_a_power_of_two():
    with pytest.raises(ConfigError):
        integrate_fundamental(get_builtin("zero"), 100)
    with pytest.raises(ConfigError):
        integrate_fundamental(get_builtin("zero"), 8)


def test_period_must_be_normalized():
    system = PeriodicSystem(dimension=1, period=2.0, A0=np.zeros((1, 1)))
    with pytest.raises(ConfigError):
        integrate_fundamental(system)


def test_closed_form_monodromies(hyperbolic_fs, full_rotation_fs):
    assert np.max(np.abs(hyperbolic_fs.monodromy - np.diag([math.e, 1 / math.e]))) < 1e-8
    assert np.max(np.abs(full_rotation_fs.monodromy - np.eye(2))) < 1e-8


def test_samples_match_the_matrix_exponential(rotation_fs):
    A = rotation_fs.system.A0
    for i in (0, 100, 517, 1024):
        assert np.allclose(rotation_fs.samples[i], expm(A * rotation_fs.grid[i]), atol=1e-10)


def test_evaluate_g_at_zero_is_exact(mathieu_fs):
    assert np.array_equal(evaluate_g(mathieu_fs, 0.0), np.eye(2))


def test_evaluate_g_uses_the_cocycle(full_rotation_fs, zero_fs):
    rotation_by_pi = np.array([[-1.0, 0.0], [0.0, -1.0]])
    assert np.allclose(evaluate_g(full_rotation_fs, 2.5), rotation_by_pi, atol=1e-8)
    assert np.array_equal(evaluate_g(zero_fs, 3.0), np.eye(2))


def test_off_grid_evaluation_is_integrator_accurate(mathieu_fs):
    system = mathieu_fs.system

    def rhs(t, y):
        return (system.coefficient(t) @ y.reshape(2, 2)).ravel()

    t = 0.3141
    reference = reference_ivp(rhs, (0.0, t), np.eye(2).ravel(), rtol=1e-12, atol=1e-13).y[:, -1]
    assert np.max(np.abs(evaluate_g(mathieu_fs, t) - reference.reshape(2, 2))) < 1e-9


def test_cocycle_identity_on_builtins(builtin_solutions):
    for name, fs in builtin_solutions.items():
        for i in range(32):
            t = i / 32
            for n in range(6):
                residual = np.linalg.norm(evaluate_g(fs, t + n) - evaluate_g(fs, t) @ np.linalg.matrix_power(fs.monodromy, n), 2)
                assert residual <= 1e-6, f"{name}: residual {residual} at t={t}, n={n}"


def test_cocycle_matches_direct_integration(mathieu_fs):
    system = mathieu_fs.system

    def rhs(t, y):
        return (system.coefficient(t) @ y.reshape(2, 2)).ravel()

    for t in (0.0, 0.3141, 0.75):
        for n in range(1, 6):
            reference = reference_ivp(rhs, (0.0, t + n), np.eye(2).ravel(), rtol=1e-12, atol=1e-13).y[:, -1]
            reference = reference.reshape(2, 2)
            cocycle = evaluate_g(mathieu_fs, t) @ np.linalg.matrix_power(mathieu_fs.monodromy, n)
            scale = max(1.0, np.linalg.norm(reference, 2))
            assert np.linalg.norm(evaluate_g(mathieu_fs, t + n) - reference, 2) <= 1e-8 * scale, (t, n)
            assert np.linalg.norm(cocycle - reference, 2) <= 1e-8 * scale, (t, n)


def test_inverse_identity(builtin_solutions):
    for name, fs in builtin_solutions.items():
        assert np.array_equal(inverse_g(fs, 0.0), np.eye(2))
        for s in np.arange(-2.0, 2.0, 0.2):
            residual = np.linalg.norm(inverse_g(fs, s) @ evaluate_g(fs, s) - np.eye(2), 2)
            assert residual <= 1e-8, f"{name}: residual {residual} at s={s}"


def test_inverse_of_hyperbolic_monodromy(hyperbolic_fs):
    assert np.allclose(inverse_g(hyperbolic_fs, 1.0), np.diag([1 / math.e, math.e]), atol=1e-8)


def test_shifted_system_cross_check(mathieu_fs):
    inverse, H, discrepancy = inverse_g_diagnostic(mathieu_fs, 0.37)
    assert discrepancy <= 1e-6
    assert np.allclose(inverse, H, atol=1e-6)


def test_singular_monodromy_is_rejected():
    system = PeriodicSystem(dimension=2, period=1.0, A0=np.diag([40.0, -40.0]), kind="constant")
    with pytest.raises(ConditioningError):
        integrate_fundamental(system, 1024)


def test_solve_ivp(full_rotation_fs):
    assert np.array_equal(solve_ivp(full_rotation_fs, np.zeros(2), 0.7), np.zeros(2))
    assert np.allclose(solve_ivp(full_rotation_fs, np.array([1.0, 0.0]), 0.25), [0.0, 1.0], atol=1e-8)
    assert np.allclose(solve_ivp(full_rotation_fs, np.array([0.3, 0.4]), 0.0), [0.3, 0.4])


def test_trajectory_frame(hyperbolic_fs):
    frame = sample_trajectory(hyperbolic_fs, np.array([1.0, 1.0]), 1.0)
    assert list(frame.columns) == ["t", "x1", "x2"]
    assert len(frame) == 1025
    assert frame["x1"].iloc[-1] == pytest.approx(math.e, rel=1e-8)


def test_multipliers(hyperbolic_fs, zero_fs):
    assert floquet_multipliers(zero_fs) == [1.0, 1.0]
    multipliers = floquet_multipliers(hyperbolic_fs)
    assert multipliers[0].real == pytest.approx(math.e)
    assert multipliers[1].real == pytest.approx(1 / math.e)


def test_rotation_multipliers_are_a_conjugate_pair():
    theta = math.pi / 3
    fs = integrate_fundamental(get_builtin("rotation", {"omega": theta}), 1024)
    first, second = floquet_multipliers(fs)
    assert abs(first) == pytest.approx(1.0)
    assert first == pytest.approx(complex(math.cos(theta), math.sin(theta)), abs=1e-8)
    assert second == pytest.approx(complex(math.cos(theta), -math.sin(theta)), abs=1e-8)


def test_operator_norm_matches_svd():
    rng = np.random.default_rng(3)
    M = rng.normal(size=(4, 4))
    norm, _ = operator_norm(M)
    assert norm == pytest.approx(np.linalg.norm(M, 2), rel=1e-8)


def test_constants_of_simple_systems(zero_fs, hyperbolic_fs, rotation_fs):
    zero = estimate_constants(zero_fs)
    assert (zero.C, zero.B, zero.D) == pytest.approx((1.05, 1.0, 1.05))
    assert estimate_constants(hyperbolic_fs).C == pytest.approx(1.05 * math.e, rel=1e-8)
    assert estimate_constants(rotation_fs).C == pytest.approx(1.05, rel=1e-8)


def test_lipschitz_and_comparison_inequalities(builtin_solutions):
    rng = np.random.default_rng(7)
    for name, fs in builtin_solutions.items():
        constants = fs.constants
        comparison = constants.comparison()
        steps = int(round(4 / constants.grid_spacing))
        for _ in range(1000):
            x, y = (v * rng.uniform() ** 0.5 / np.linalg.norm(v) for v in rng.normal(size=(2, 2)))
            G = fs.samples[rng.integers(0, fs.step_count)]
            assert np.linalg.norm(G @ (x - y)) <= constants.C * np.linalg.norm(x - y), name
            r, s = (-2.0 + constants.grid_spacing * k for k in rng.integers(0, steps + 1, size=2))
            gap = abs(s - r) + np.linalg.norm(evaluate_g(fs, s) @ x - evaluate_g(fs, r) @ y)
            assert np.linalg.norm(x - y) <= comparison(x) * gap, f"{name}: r={r}, s={s}"


def test_fourth_order_convergence():
    system = get_builtin("mathieu", {"a": 1.0, "q": 0.2})
    reference = integrate_fundamental(system, 4096, with_constants=False).monodromy
    errors = [np.linalg.norm(integrate_fundamental(system, n, with_constants=False).monodromy - reference, 2)
              for n in (128, 256, 512)]
    for coarse, fine in zip(errors, errors[1:]):
        assert coarse / fine >= 8, f"errors {errors}"

"""
Fundamental solution g(t) of a period-1 linear system, its monodromy and the
constants C, B, D bounding g and its inverse
"""

import logging
import math
from dataclasses import replace
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from app.errors import ConditioningError, ConfigError, DiagnosticsError, IntegrationError
from app.models import FundamentalConstants, FundamentalSolution, PeriodicSystem
from app.systems import shifted

logger = logging.getLogger(__name__)

SAFETY_FACTOR = 1.05
CONDITION_LIMIT = 1e12
SNAP_TOLERANCE = 1e-9
NORM_TOLERANCE = 1e-10
NORM_MAX_ITERATIONS = 500
CONSTANTS_RANGE = 2.0


def _rk4_step(system: PeriodicSystem, t: float, h: float, G: np.ndarray) -> np.ndarray:
    X0 = system.coefficient(t)
    Xm = system.coefficient(t + 0.5 * h)
    X1 = system.coefficient(t + h)
    k1 = X0 @ G
    k2 = Xm @ (G + 0.5 * h * k1)
    k3 = Xm @ (G + 0.5 * h * k2)
    k4 = X1 @ (G + h * k3)
    return G + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_fundamental(system: PeriodicSystem, steps: int = 1024,
                          with_constants: bool = True) -> FundamentalSolution:
    if system.period != 1.0:
        raise ConfigError("system must have period 1, normalize it first", field="period")
    if steps < 16 or steps & (steps - 1):
        raise ConfigError(f"steps must be a power of two >= 16, got {steps}", field="steps")

    n = system.dimension
    h = 1.0 / steps
    grid = np.linspace(0.0, 1.0, steps + 1)
    samples = np.empty((steps + 1, n, n))
    samples[0] = np.eye(n)
    for i in range(steps):
        G = _rk4_step(system, i * h, h, samples[i])
        if not np.all(np.isfinite(G)):
            logger.error(f"Integration of {system.label()} produced non-finite values")
            raise IntegrationError(grid[i + 1])
        samples[i + 1] = G
    samples.setflags(write=False)

    monodromy = samples[-1]
    condition = float(np.linalg.cond(monodromy))
    if not np.isfinite(condition) or condition > CONDITION_LIMIT:
        logger.error(f"Monodromy of {system.label()} is numerically singular")
        raise ConditioningError(1.0, condition)

    fs = FundamentalSolution(
        system=system,
        grid=grid,
        samples=samples,
        monodromy=monodromy,
        monodromy_inverse=np.linalg.inv(monodromy),
        step_count=steps,
    )
    logger.info(f"Integrated {system.label()} with N={steps}")
    if with_constants:
        fs = replace(fs, constants=estimate_constants(fs))
    return fs


def _g_on_period(fs: FundamentalSolution, tau: float) -> np.ndarray:
    """g(tau) for tau in [0, 1]: a grid sample or one RK4 sub-step from the lower node"""
    position = tau * fs.step_count
    nearest = int(round(position))
    if abs(position - nearest) < SNAP_TOLERANCE:
        return fs.samples[min(max(nearest, 0), fs.step_count)]
    lower = min(int(math.floor(position)), fs.step_count - 1)
    t0 = lower * fs.step
    return _rk4_step(fs.system, t0, tau - t0, fs.samples[lower])


def evaluate_g(fs: FundamentalSolution, t: float) -> np.ndarray:
    """g(t) = g(tau) g^m with t = tau + m, tau in [0, 1)"""
    m = math.floor(t)
    tau = t - m
    if tau >= 1.0:
        m, tau = m + 1, 0.0
    G = _g_on_period(fs, tau)
    if m == 0:
        return np.array(G, copy=True)
    if m > 0:
        return G @ np.linalg.matrix_power(fs.monodromy, m)
    return G @ np.linalg.matrix_power(fs.monodromy_inverse, -m)


def inverse_g(fs: FundamentalSolution, s: float) -> np.ndarray:
    G = evaluate_g(fs, s)
    condition = float(np.linalg.cond(G))
    if not np.isfinite(condition) or condition > CONDITION_LIMIT:
        logger.error(f"g({s}) is too ill-conditioned to invert: {condition:.3e}")
        raise ConditioningError(s, condition)
    return np.linalg.inv(G)


def inverse_g_diagnostic(fs: FundamentalSolution, s: float) -> Tuple[np.ndarray, np.ndarray, float]:
    """Direct inverse of g(s) next to h(-s) of the shifted system t -> X(t + s)

    Returns (inverse, h(-s), discrepancy in the 2-norm).
    """
    inverse = inverse_g(fs, s)
    system = shifted(fs.system, s)
    count = max(16, int(math.ceil(abs(s) * fs.step_count)))
    h = -s / count
    H = np.eye(fs.dimension)
    for i in range(count):
        H = _rk4_step(system, i * h, h, H)
    discrepancy = float(np.linalg.norm(inverse - H, 2))
    if discrepancy > 1e-6:
        logger.warning(f"Shifted-system inverse at s={s} differs by {discrepancy:.3e}")
    return inverse, H, discrepancy


def solve_ivp(fs: FundamentalSolution, x: np.ndarray, t: float) -> np.ndarray:
    return evaluate_g(fs, t) @ np.asarray(x, dtype=float)


def sample_trajectory(fs: FundamentalSolution, x: np.ndarray, t_end: float = 1.0) -> pd.DataFrame:
    """x(t) = g(t)x on the grid of spacing 1/N from 0 to t_end"""
    x = np.asarray(x, dtype=float)
    count = int(round(abs(t_end) * fs.step_count))
    direction = 1.0 if t_end >= 0 else -1.0
    times = [direction * i * fs.step for i in range(count + 1)]
    rows = [[t, *solve_ivp(fs, x, t)] for t in times]
    columns = ["t"] + [f"x{i + 1}" for i in range(fs.dimension)]
    return pd.DataFrame(rows, columns=columns)


def floquet_multipliers(fs: FundamentalSolution) -> List[complex]:
    try:
        eigenvalues = np.linalg.eigvals(fs.monodromy)
    except np.linalg.LinAlgError as e:
        logger.error(f"Eigenvalue computation failed for {fs.system.label()}: {e}")
        raise DiagnosticsError(f"eigen-solver did not converge: {e}")
    if not np.all(np.isfinite(eigenvalues)):
        raise DiagnosticsError("eigen-solver returned non-finite multipliers")
    # rounded keys keep conjugate pairs and near-ties in a fixed order
    return sorted((complex(value) for value in eigenvalues),
                  key=lambda z: (-round(abs(z), 12), -round(z.real, 12), -round(z.imag, 12)))


def operator_norm(M: np.ndarray, start: Optional[np.ndarray] = None) -> Tuple[float, np.ndarray]:
    """Induced 2-norm by power iteration on M^T M; returns (norm, dominant right vector)"""
    n = M.shape[1]
    generic = np.linspace(1.0, 2.0, n) / np.linalg.norm(np.linspace(1.0, 2.0, n))
    v = generic if start is None else start + 1e-2 * generic
    v = v / np.linalg.norm(v)
    A = M.T @ M
    estimate = 0.0
    for _ in range(NORM_MAX_ITERATIONS):
        w = A @ v
        size = float(np.linalg.norm(w))
        if size == 0.0:
            return 0.0, v
        updated = float(v @ w)
        v = w / size
        if abs(updated - estimate) <= NORM_TOLERANCE * abs(updated):
            estimate = updated
            break
        estimate = updated
    return math.sqrt(max(estimate, 0.0)), v


def estimate_constants(fs: FundamentalSolution) -> FundamentalConstants:
    vector = None
    largest = 0.0
    for G in fs.samples:
        size, vector = operator_norm(G, vector)
        largest = max(largest, size)
    C = max(1.0, SAFETY_FACTOR * largest)

    spacing = 1.0 / min(fs.step_count, 64)
    count = int(round(2 * CONSTANTS_RANGE / spacing))
    forward_vector, inverse_vector = None, None
    largest_d, largest_b = 0.0, 0.0
    previous = None
    for j in range(count + 1):
        r = -CONSTANTS_RANGE + j * spacing
        G = evaluate_g(fs, r)
        G_inv = inverse_g(fs, r)
        size, forward_vector = operator_norm(G, forward_vector)
        inverse_size, inverse_vector = operator_norm(G_inv, inverse_vector)
        largest_d = max(largest_d, size, inverse_size)
        if previous is not None:
            slope, _ = operator_norm(G_inv - previous)
            largest_b = max(largest_b, slope / spacing)
        previous = G_inv
    D = max(1.0, SAFETY_FACTOR * largest_d)
    B = max(1.0, SAFETY_FACTOR * largest_b)

    logger.info(f"Constants for {fs.system.label()}: C={C:.6g} B={B:.6g} D={D:.6g}")
    return FundamentalConstants(C=C, B=B, D=D, grid_spacing=spacing)


def constants_of(fs: FundamentalSolution) -> FundamentalConstants:
    if fs.constants is None:
        return estimate_constants(fs)
    return fs.constants

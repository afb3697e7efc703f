#!/usr/bin/env python3
"""
Run the eleven acceptance criteria, time each one and write acceptance_info.json
Can be run manually or from CI; render the result with acceptance_summary.py
"""

import json
import math
import os
import sys
import time

import numpy as np
from scipy.integrate import solve_ivp

# Add parent directory to path for imports
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app import __version__
from app.chains import brute_force_chain_closure, build_transition_graph, chain_components, is_recurrent_sample, stable_set_sample
from app.config import make_config
from app.correspondence import lift_constants, lift_chain, project_chain, random_lift_chain, random_suspension_chain
from app.boxes import build_box_cover
from app.fibers import EpsilonField, OperatorMap, circle_distance, make_fiber
from app.fundamental import constants_of, evaluate_g, integrate_fundamental
from app.main import periodic_start
from app.suspension import SuspensionMap, suspend_point
from app.systems import get_builtin
from app.verifier import VerificationContext

SEED = 42
EPSILON = EpsilonField(1e-2)
BUILTINS = [
    ("zero", {}),
    ("rotation", {"omega": 2 * math.pi * 0.3}),
    ("hyperbolic", {"lambda": 1.0}),
    ("mathieu", {"a": 1.0, "q": 0.2}),
]


def solution(name, params=None, steps=1024):
    return integrate_fundamental(get_builtin(name, params or {}), steps)


def skew_gap(fiber, p, q):
    return circle_distance(p[0], q[0]) + fiber.distance(p[1:], q[1:])


def cocycle_identity():
    worst = 0.0
    for name, params in BUILTINS:
        fs = solution(name, params)
        for i in range(32):
            t = i / 32
            for n in range(6):
                expected = evaluate_g(fs, t) @ np.linalg.matrix_power(fs.monodromy, n)
                worst = max(worst, float(np.linalg.norm(evaluate_g(fs, t + n) - expected, 2)))

    # direct integration, independent of the tabulated samples
    fs = solution("mathieu", {"a": 1.0, "q": 0.2})
    system = fs.system

    def rhs(t, y):
        return (system.coefficient(t) @ y.reshape(2, 2)).ravel()

    direct = 0.0
    for t in (0.0, 0.3141, 0.75):
        for n in range(1, 6):
            reference = solve_ivp(rhs, (0.0, t + n), np.eye(2).ravel(), rtol=1e-12, atol=1e-13).y[:, -1]
            direct = max(direct, float(np.linalg.norm(evaluate_g(fs, t + n) - reference.reshape(2, 2), 2)))
    return max(worst, direct) <= 1e-6, f"max residual {worst:.3e}, against direct integration {direct:.3e}"


def closed_form_monodromy():
    hyperbolic = np.max(np.abs(solution("hyperbolic").monodromy - np.diag([math.e, 1 / math.e])))
    rotation = np.max(np.abs(solution("rotation", {"omega": 2 * math.pi}).monodromy - np.eye(2)))
    return max(hyperbolic, rotation) <= 1e-8, f"hyperbolic {hyperbolic:.3e}, rotation {rotation:.3e}"


def constant_inequalities():
    rng = np.random.default_rng(SEED)
    violations = 0
    for name, params in BUILTINS:
        fs = solution(name, params)
        constants = constants_of(fs)
        comparison = constants.comparison()
        steps = int(round(4 / constants.grid_spacing))
        for _ in range(1000):
            x, y = (v * rng.uniform() ** 0.5 / np.linalg.norm(v) for v in rng.normal(size=(2, 2)))
            G = fs.samples[rng.integers(0, fs.step_count)]
            if np.linalg.norm(G @ x - G @ y) > constants.C * np.linalg.norm(x - y):
                violations += 1
            r, s = (-2.0 + constants.grid_spacing * k for k in rng.integers(0, steps + 1, size=2))
            gap = abs(s - r) + np.linalg.norm(evaluate_g(fs, s) @ x - evaluate_g(fs, r) @ y)
            if np.linalg.norm(x - y) > comparison(x) * gap:
                violations += 1
    return violations == 0, f"{violations} violations"


def chain_lift_validity():
    failures = 0
    for name, params in BUILTINS:
        fs = solution(name, params)
        fiber = make_fiber("projective", 2)
        rng = np.random.default_rng(SEED)
        for _ in range(100):
            u, v = rng.uniform(size=2)
            start = fiber.normalize(rng.normal(size=2))
            chain = random_lift_chain(fs, EPSILON, u, v, start, int(rng.integers(1, 5)), 1.0, rng, fiber)
            lifted = lift_chain(fs, chain, u, v, EPSILON, fiber)
            gap = max(skew_gap(fiber, lifted.start, suspend_point(fs, u, chain.start, fiber)),
                      skew_gap(fiber, lifted.end, suspend_point(fs, v, chain.end, fiber)))
            if gap > 1e-9 or not np.all(lifted.residuals < lifted.bounds):
                failures += 1
    return failures == 0, f"{failures} of 400 lifts failed"


def chain_projection_validity():
    failures, cases = 0, set()
    for name, params in [("zero", {}), ("rotation", {"omega": 2 * math.pi}), ("hyperbolic", {})]:
        fs = solution(name, params)
        fiber = make_fiber("projective", 2)
        x, period = periodic_start(fs, fiber)
        rng = np.random.default_rng(SEED)
        for i in range(100):
            n_min = 1 + i % 2
            chain = random_suspension_chain(fs, x, EPSILON, n_min, 3 + i % 3, rng, fiber,
                                            wraps=i % 3 == 0, period=period)
            projected = project_chain(fs, chain, EPSILON, n_min, fiber)
            cases.update(projected.cases)
            if not np.all(projected.times > n_min) or not np.all(projected.residuals <= projected.bounds):
                failures += 1
    ok = failures == 0 and {2, 3} <= cases
    return ok, f"{failures} of 300 projections failed, cases seen {sorted(cases)}"


def _context(name, params, fiber_kind):
    config = make_config({"builtin": name, "params": params, "fiber": fiber_kind, "resolution": 64,
                          "seed": SEED, "command": "verify"})
    fs = integrate_fundamental(config.build_system(), config.steps)
    return VerificationContext(fs, config.build_fiber(2), config)


def component_bijection():
    details, ok = [], True
    for name, kind, expected in [("hyperbolic", "projective", 2), ("rotation", "sphere", 1)]:
        context = _context(name, {}, kind)
        counts = (len(context.g_components), len(context.phi_components))
        ok = ok and counts == (expected, expected) and context.bijection is not None
        details.append(f"{name} {counts[0]}<->{counts[1]}")
    return ok, ", ".join(details)


def chain_recurrent_sets():
    details, ok = [], True
    for name, kind in [("hyperbolic", "projective"), ("rotation", "sphere")]:
        context = _context(name, {}, kind)
        phi_boxes = context.phi_components.chain_recurrent_boxes
        suspended = frozenset().union(*context.suspended_components)
        difference, union = len(phi_boxes ^ suspended), len(phi_boxes | suspended)
        ok = ok and difference <= 0.02 * union
        details.append(f"{name} {difference}/{union}")
    return ok, ", ".join(details)


def recurrence_correspondence():
    fs = solution("rotation", {"omega": 2 * math.pi * 3 / 7})
    fiber = make_fiber("sphere", 2)
    rng = np.random.default_rng(SEED)
    g_map, flow_map = OperatorMap(fiber, fs.monodromy), SuspensionMap(fs, fiber)
    tol = lift_constants(fs, fiber)[0] * 1e-9
    mismatches = 0
    for x in rng.normal(size=(8, 2)):
        x = fiber.normalize(x)
        if is_recurrent_sample(g_map, x, 1e-9, 64).return_time != 7:
            mismatches += 1
        for j in range(8):
            if is_recurrent_sample(flow_map, suspend_point(fs, j / 8, x, fiber), tol, 64).return_time != 7:
                mismatches += 1
    return mismatches == 0, f"{mismatches} mismatched return times"


def stable_sets():
    context = _context("hyperbolic", {}, "projective")
    fs, fiber = context.fs, context.fiber
    rng = np.random.default_rng(SEED)
    expanding = context.g_components.component_of(0)
    contracting = 1 - expanding
    wrong = 0
    angles = [a for a in rng.uniform(0, math.pi, size=60) if abs(a - math.pi / 2) > 1e-3][:50]
    samples = [(np.array([math.cos(a), math.sin(a)]), expanding) for a in angles]
    samples.append((np.array([0.0, 1.0]), contracting))
    for x, expected in samples:
        s = float(rng.uniform())
        a = stable_set_sample(context.monodromy_map, context.g_components, fiber.normalize(x), 200)
        b = stable_set_sample(context.flow_map, context.phi_components, suspend_point(fs, s, x, fiber), 200)
        if a != expected or b != context.bijection[expected]:
            wrong += 1
    return wrong == 0, f"{wrong} of {len(samples)} points in the wrong stable set"


def oracle_equivalence():
    counterexamples = 0
    cases = [("zero", {}, "ball", 8), ("rotation", {"omega": 2 * math.pi * 0.3}, "sphere", 64),
             ("hyperbolic", {}, "projective", 64)]
    for name, params, kind, resolution in cases:
        fs = solution(name, params)
        fiber = make_fiber(kind, 2)
        cover = build_box_cover(fiber, resolution)
        step_map = OperatorMap(fiber, fs.monodromy)
        recurrent = chain_components(build_transition_graph(cover, step_map, EPSILON, seed=SEED)).chain_recurrent_boxes
        centers = [cover.center(box) for box in range(cover.count)]
        reach = brute_force_chain_closure(centers, step_map, EPSILON, k_max=1)
        counterexamples += sum(1 for box in range(cover.count) if reach[box, box] and box not in recurrent)
    return counterexamples == 0, f"{counterexamples} counterexamples"


def integrator_order():
    system = get_builtin("mathieu", {"a": 1.0, "q": 0.2})
    reference = integrate_fundamental(system, 4096, with_constants=False).monodromy
    errors = [float(np.linalg.norm(integrate_fundamental(system, n, with_constants=False).monodromy - reference, 2))
              for n in (128, 256, 512)]
    ratios = [errors[i] / errors[i + 1] for i in range(2)]
    return all(r >= 8 for r in ratios), "ratios " + ", ".join(f"{r:.1f}" for r in ratios)


CRITERIA = [
    ("cocycle identity", cocycle_identity, 5),
    ("closed-form monodromy", closed_form_monodromy, 1),
    ("constant inequalities", constant_inequalities, 5),
    ("chain lift validity", chain_lift_validity, 30),
    ("chain projection validity", chain_projection_validity, 30),
    ("component bijection", component_bijection, 60),
    ("chain recurrent set correspondence", chain_recurrent_sets, 60),
    ("recurrence correspondence", recurrence_correspondence, 5),
    ("stable sets", stable_sets, 30),
    ("oracle equivalence", oracle_equivalence, 30),
    ("integrator order", integrator_order, 5),
]


def main():
    print(f"🔧 floquet-chains {__version__} acceptance run (seed {SEED})")
    results = {}
    for number, (title, criterion, budget) in enumerate(CRITERIA, start=1):
        started = time.perf_counter()
        try:
            passed, detail = criterion()
        except Exception as e:
            passed, detail = False, f"{type(e).__name__}: {e}"
        elapsed = time.perf_counter() - started
        results[f"{number}. {title}"] = {"passed": bool(passed), "detail": detail,
                                         "seconds": round(elapsed, 2), "budget": budget}
        marker = "✅" if passed else "❌"
        slow = " ⚠️ over budget" if elapsed > budget else ""
        print(f"{marker} {number}. {title}: {detail} ({elapsed:.1f}s){slow}")

    passed = sum(1 for result in results.values() if result["passed"])
    print(f"📊 {passed}/{len(results)} criteria passed")
    with open("acceptance_info.json", "w") as f:
        json.dump({"version": __version__, "seed": SEED, "passed": passed, "total": len(results),
                   "results": results}, f, indent=2)
    return 0 if passed == len(results) else 1


if __name__ == "__main__":
    exit(main())

"""
Floquet Chains command line

    python run.py monodromy --builtin hyperbolic --param lambda=1
    python run.py verify all --config system.cfg
    python run.py chain-graph --builtin hyperbolic --fiber projective --resolution 64

Exit codes: 0 success, 1 configuration error, 2 numeric or chain-construction
error, 3 at least one verification check failed.
"""

import argparse
import logging
import os
from typing import Dict, List, Optional, Tuple

import numpy as np

from app import __version__
from app.boxes import build_box_cover
from app.chains import build_transition_graph, chain_components
from app.config import COMMANDS, RunConfig, parse_config
from app.correspondence import chain_summary, lift_chain, project_chain, random_lift_chain, random_suspension_chain
from app.errors import ConfigError, FloquetError
from app.fibers import FiberSpace, OperatorMap
from app.fundamental import constants_of, floquet_multipliers, integrate_fundamental, sample_trajectory
from app.models import THEOREM_IDS, FundamentalSolution
from app.output import (write_chain_graph, write_component_suspensions, write_frame, write_monodromy_report,
                        write_verification, write_witness)
from app.verifier import verify_all

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFICATION_FAILED = 3


def configure_logging():
    level = os.getenv("FLOQUET_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="floquet-chains",
                                     description="Chain recurrence of periodic linear systems and their suspension flows")
    parser.add_argument("--version", action="version", version=f"floquet-chains {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("theorem", nargs="?", default=None,
                        help=f"for verify: 'all' or one of {', '.join(THEOREM_IDS)}")
    parser.add_argument("--config", help="path of a key: value config file")
    parser.add_argument("--builtin", help="builtin system: zero, rotation, hyperbolic, mathieu")
    parser.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                        help="builtin parameter, repeatable (omega, lambda, a, q)")
    parser.add_argument("--steps", type=int)
    parser.add_argument("--fiber", choices=("ball", "sphere", "projective"))
    parser.add_argument("--radius", type=float)
    parser.add_argument("--resolution", type=int)
    parser.add_argument("--base-resolution", type=int)
    parser.add_argument("--epsilon", type=float)
    parser.add_argument("--samples-per-box", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--output-dir")
    return parser


def _params(pairs: List[str]) -> Dict[str, float]:
    params = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise ConfigError(f"expected KEY=VALUE, got '{pair}'", field="param")
        try:
            params[key.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"parameter value must be a number, got '{value}'", field=key.strip())
    return params


def config_from_args(args: argparse.Namespace) -> RunConfig:
    text = ""
    if args.config:
        try:
            with open(args.config, "r") as f:
                text = f.read()
        except OSError as e:
            raise ConfigError(f"cannot read config file: {e}", field="config")
    overrides = {
        "command": args.command,
        "theorem": args.theorem,
        "builtin": args.builtin,
        "steps": args.steps,
        "fiber": args.fiber,
        "radius": args.radius,
        "resolution": args.resolution,
        "base_resolution": args.base_resolution,
        "epsilon": args.epsilon,
        "samples_per_box": args.samples_per_box,
        "seed": args.seed,
        "workers": args.workers,
        "output_dir": args.output_dir,
    }
    params = _params(args.param)
    if params:
        overrides["params"] = params
    return parse_config(text, overrides)


def periodic_start(fs: FundamentalSolution, fiber: FiberSpace) -> Tuple[np.ndarray, int]:
    """A periodic point of the monodromy map on the fiber and its period"""
    if not fiber.compact:
        return np.zeros(fs.dimension), 1
    values, vectors = np.linalg.eig(fs.monodromy)
    index = int(np.argmin(np.abs(values.imag)))
    if abs(values[index].imag) > 1e-8:
        raise ConfigError("project-demo needs a real Floquet multiplier for a periodic start", field="command")
    x = fiber.normalize(np.real(vectors[:, index]))
    period = 1 if fiber.kind == "projective" or values[index].real > 0 else 2
    return x, period


def _initial_state(config: RunConfig, dimension: int) -> np.ndarray:
    if config.initial_state is None:
        return np.eye(dimension)[0]
    if len(config.initial_state) != dimension:
        raise ConfigError(f"initial_state needs {dimension} entries, got {len(config.initial_state)}",
                          field="initial_state")
    return np.asarray(config.initial_state, dtype=float)


def _dispatch(config: RunConfig) -> int:
    system = config.build_system()
    print(f"🔧 {config.command} on {system.label()} with N={config.steps}")
    fs = integrate_fundamental(system, config.steps)

    if config.command == "integrate":
        frame = sample_trajectory(fs, _initial_state(config, fs.dimension), config.t_end)
        path = write_frame(config, "trajectory.csv", frame)
        print(f"✅ Wrote {len(frame)} trajectory rows to {path}")
        return EXIT_OK

    if config.command == "monodromy":
        multipliers = floquet_multipliers(fs)
        path = write_monodromy_report(config, system.label(), fs.monodromy, multipliers, constants_of(fs))
        print(f"📊 Floquet multipliers: {', '.join(f'{z:.6g}' for z in multipliers)}")
        print(f"✅ Wrote {path}")
        return EXIT_OK

    fiber = config.build_fiber(fs.dimension)

    if config.command == "chain-graph":
        cover = build_box_cover(fiber, config.resolution)
        graph = build_transition_graph(cover, OperatorMap(fiber, fs.monodromy, "g"), config.epsilon_field(),
                                       config.samples_per_box, seed=config.seed,
                                       include_corners=config.include_corners, workers=config.workers)
        decomposition = chain_components(graph)
        paths = write_chain_graph(config, graph, decomposition)
        paths += write_component_suspensions(config, fs, fiber, decomposition)
        print(f"📊 {cover.count} boxes, {graph.digraph.number_of_edges()} edges, "
              f"{len(decomposition)} chain components on {fiber.describe()}")
        print(f"✅ Wrote {', '.join(paths)}")
        return EXIT_OK

    if config.command == "verify":
        reports = verify_all(fs, fiber, config, config.theorems)
        path = write_verification(config, reports)
        for report in reports:
            marker = "✅" if report.passed else "❌"
            print(f"{marker} {report.summary_line()}")
        print(f"📊 Wrote {path}")
        return EXIT_OK if all(report.passed for report in reports) else EXIT_VERIFICATION_FAILED

    epsilon = config.epsilon_field()
    rng = np.random.default_rng(config.seed)

    if config.command == "lift-demo":
        start = fiber.normalize(_initial_state(config, fs.dimension))
        chain = random_lift_chain(fs, epsilon, config.u, config.v, start, config.chain_steps, 0.0, rng, fiber)
        lifted = lift_chain(fs, chain, config.u, config.v, epsilon, fiber, config.grid_size)
        write_witness(config, "lift_input.txt", "discrete chain of g", chain)
        path = write_witness(config, "lift_output.txt", "lifted chain of the suspension flow", lifted,
                             {"u": config.u, "v": config.v})
        for line in chain_summary(lifted):
            print(f"  {line}")
        print(f"✅ Lifted a {chain.length}-step chain, wrote {path}")
        return EXIT_OK

    # project-demo
    x, period = periodic_start(fs, fiber)
    steps = max(config.chain_steps, 3)
    chain = random_suspension_chain(fs, x, epsilon, config.n_min, steps, rng, fiber, wraps=True, period=period,
                                    grid_size=config.grid_size)
    projected = project_chain(fs, chain, epsilon, config.n_min, fiber, config.grid_size)
    write_witness(config, "project_input.txt", "closed chain of the time-one suspension flow", chain)
    path = write_witness(config, "project_output.txt", "projected chain of g", projected,
                         {"n_min": config.n_min, "cases": " ".join(str(c) for c in projected.cases)})
    for line in chain_summary(projected):
        print(f"  {line}")
    print(f"✅ Projected a {chain.length}-step chain (cases {projected.cases}), wrote {path}")
    return EXIT_OK


def run_command(config: RunConfig) -> int:
    try:
        return _dispatch(config)
    except FloquetError as e:
        print(f"❌ {type(e).__name__}: {e}")
        logger.debug("command failed", exc_info=True)
        return e.exit_code


def main(argv: Optional[List[str]] = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
    except ConfigError as e:
        print(f"❌ {e}")
        return e.exit_code
    return run_command(config)


if __name__ == "__main__":
    exit(main())

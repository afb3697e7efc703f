"""
File emission: every file opens with a comment header naming the tool
version, the config hash and the seed, and carries no timestamps
"""

import logging
import os
from typing import Iterable, List, Optional

import numpy as np
import pandas as pd
from jinja2 import Environment, FileSystemLoader

from app import __version__
from app.chains import ComponentDecomposition, TransitionGraph, core_points
from app.config import RunConfig
from app.fibers import FiberSpace
from app.models import ChainWitness, FundamentalConstants, FundamentalSolution, VerificationReport
from app.suspension import suspend_set

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
TEMPLATE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "templates")


def format_float(value) -> str:
    if value is None:
        return "-"
    return FLOAT_FORMAT % value


def format_complex(value: complex) -> str:
    sign = "+" if value.imag >= 0 else "-"
    return f"{FLOAT_FORMAT % value.real} {sign} {FLOAT_FORMAT % abs(value.imag)}i"


templates = Environment(loader=FileSystemLoader(TEMPLATE_DIR), keep_trailing_newline=True,
                        trim_blocks=True, lstrip_blocks=True)
templates.filters["f17"] = format_float
templates.filters["complex17"] = format_complex


def file_header(config: RunConfig) -> str:
    return (f"# floquet-chains {__version__}\n"
            f"# config-hash: {config.config_hash()}\n"
            f"# seed: {config.seed}\n")


def _path(config: RunConfig, filename: str) -> str:
    os.makedirs(config.output_dir, exist_ok=True)
    return os.path.join(config.output_dir, filename)


def write_frame(config: RunConfig, filename: str, frame: pd.DataFrame) -> str:
    path = _path(config, filename)
    with open(path, "w", newline="") as f:
        f.write(file_header(config))
        frame.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def write_lines(config: RunConfig, filename: str, lines: Iterable[str]) -> str:
    path = _path(config, filename)
    with open(path, "w", newline="") as f:
        f.write(file_header(config))
        for line in lines:
            f.write(line + "\n")
    return path


def render(template: str, config: RunConfig, **context) -> str:
    return file_header(config) + templates.get_template(template).render(**context)


def write_rendered(config: RunConfig, filename: str, template: str, **context) -> str:
    path = _path(config, filename)
    with open(path, "w", newline="") as f:
        f.write(render(template, config, **context))
    return path


def edge_lines(graph: TransitionGraph) -> List[str]:
    lines = ["src_box_id dst_box_id"]
    for src, dst in graph.digraph.edges():
        lines.append(f"{src} {dst}")
    return lines


def write_chain_graph(config: RunConfig, graph: TransitionGraph, decomposition: ComponentDecomposition,
                      prefix: str = "") -> List[str]:
    return [
        write_lines(config, f"{prefix}edges.txt", edge_lines(graph)),
        write_frame(config, f"{prefix}boxes.csv", graph.cover.geometry_frame()),
        write_frame(config, f"{prefix}components.csv", decomposition.labels_frame()),
    ]


def write_component_suspensions(config: RunConfig, fs: FundamentalSolution, fiber: FiberSpace,
                                decomposition: ComponentDecomposition) -> List[str]:
    """suspension_<i>.csv: the core points of component i carried along the base grid"""
    paths = []
    for component in decomposition:
        points = core_points(decomposition, component.index)
        if not len(points):
            logger.warning(f"Component {component.index} has no core points, skipping its suspension")
            continue
        suspension = suspend_set(fs, points, config.resolved_base_resolution, fiber)
        paths.append(write_frame(config, f"suspension_{component.index}.csv", suspension.to_frame()))
    return paths


def write_monodromy_report(config: RunConfig, system_label: str, monodromy: np.ndarray,
                           multipliers: List[complex], constants: Optional[FundamentalConstants]) -> str:
    return write_rendered(config, "monodromy.txt", "monodromy_report.txt.j2",
                          system=system_label, steps=config.steps, monodromy=monodromy.tolist(),
                          multipliers=multipliers, constants=constants)


def write_verification(config: RunConfig, reports: List[VerificationReport]) -> str:
    return write_rendered(config, "verification.txt", "verification_report.txt.j2", reports=reports)


def write_witness(config: RunConfig, filename: str, title: str, witness: ChainWitness,
                  extra: Optional[dict] = None) -> str:
    frame = witness.to_frame()
    table = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return write_rendered(config, filename, "witness_dump.txt.j2", title=title, witness=witness,
                          table=table, extra=extra or {})

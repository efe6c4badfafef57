#!/usr/bin/env python3
# Copyright 2022 Canonical Ltd.
# See LICENSE file for licensing details.

"""Writers for the CSV, PGM, JSON and report artifacts.

Floats are written with ``repr`` (shortest round-trip form); non-finite values become the
literals ``inf``, ``-inf`` and ``nan``, quoted as strings in JSON. Text files use LF line
endings, so identical inputs give byte-identical files.
"""

import csv
import json
import logging
import math
from pathlib import Path
from typing import IO, Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np
from jinja2 import Template

from analysis import EigenTrace
from basin import BasinGrid, BasinStats
from core import SolverResult
from literals import (
    PGM_MAXVAL,
    PGM_UNREGISTERED_LEVEL,
    REPORT_TEMPLATE,
    UNCONVERGED_LABEL,
    UNREGISTERED_LABEL,
)

logger = logging.getLogger(__name__)

TEMPLATES_DIR = Path(__file__).resolve().parent.parent / "templates"
INF_CELL = "inf"

PathOrStream = Union[str, Path, IO[str]]


def format_float(value: float) -> str:
    """Shortest round-trip text of a float; ``inf``, ``-inf`` or ``nan`` otherwise."""
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(value)


def json_safe(value: Any) -> Any:
    """Recursively convert numpy scalars and arrays, spelling non-finite floats as strings."""
    if isinstance(value, Mapping):
        return {str(k): json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [json_safe(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else format_float(value)
    return value


def _write_rows(target: PathOrStream, header: Sequence[str], rows: Iterable[List[str]]) -> None:
    if isinstance(target, (str, Path)):
        with open(target, "w", newline="", encoding="utf-8") as file:
            _write_rows(file, header, rows)
        logger.debug(f"Wrote {target}")
        return
    writer = csv.writer(target, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)


def write_trace_csv(result: SolverResult, target: PathOrStream) -> None:
    """Write ``iter,x_1..x_N,p_1..p_N,res_inf``; p columns only for momentum methods."""
    n = result.final_state.x.size
    m = result.final_state.p.size
    header = (
        ["iter"]
        + [f"x_{k + 1}" for k in range(n)]
        + [f"p_{k + 1}" for k in range(m)]
        + ["res_inf"]
    )
    rows = (
        [str(record.iteration)]
        + [format_float(v) for v in record.x]
        + [format_float(v) for v in record.p]
        + [format_float(record.residual)]
        for record in result.trace
    )
    _write_rows(target, header, rows)


def write_eigen_trace_csv(trace: EigenTrace, target: PathOrStream) -> None:
    """Write ``iter,lambda_plus,lambda_minus,ratio,c_plus,c_minus``."""
    header = ["iter", "lambda_plus", "lambda_minus", "ratio", "c_plus", "c_minus"]
    rows = (
        [str(r.iteration)]
        + [format_float(v) for v in (r.lambda_plus, r.lambda_minus, r.ratio, r.c_plus, r.c_minus)]
        for r in trace.records
    )
    _write_rows(target, header, rows)


def write_table_csv(
    table: Mapping[str, Sequence[Optional[int]]], x0s: Sequence[float], target: PathOrStream
) -> None:
    """Write one row per method and one column per initial guess.

    A cell holds the iteration count, or ``inf`` where the run did not converge (None).
    """
    header = ["method"] + [format_float(x0) for x0 in x0s]
    rows = (
        [method] + [INF_CELL if count is None else str(count) for count in counts]
        for method, counts in table.items()
    )
    _write_rows(target, header, rows)


def write_basin_csv(grid: BasinGrid, target: PathOrStream) -> None:
    """Write ``i,j,x0,y0,label,iters`` with ``i`` as the outer loop."""
    xs, ys = grid.cell_centers()
    rows = (
        [
            str(i),
            str(j),
            format_float(xs[i]),
            format_float(ys[j]),
            str(int(grid.labels[i, j])),
            str(int(grid.iters[i, j])),
        ]
        for i in range(grid.nx)
        for j in range(grid.ny)
    )
    _write_rows(target, ["i", "j", "x0", "y0", "label", "iters"], rows)


def label_levels(labels: np.ndarray, n_roots: int) -> np.ndarray:
    """Map labels to gray levels: 0 black, k to ``255 k / K`` rounded half up, -1 to 32."""
    labels = np.asarray(labels)
    levels = np.zeros(labels.shape, dtype=np.uint8)
    if n_roots > 0:
        found = labels >= 1
        levels[found] = np.floor(PGM_MAXVAL * labels[found] / n_roots + 0.5).astype(np.uint8)
    levels[labels == UNREGISTERED_LABEL] = PGM_UNREGISTERED_LEVEL
    levels[labels == UNCONVERGED_LABEL] = 0
    return levels


def write_basin_pgm(grid: BasinGrid, path: Union[str, Path]) -> None:
    """Write a binary P5 image, ``nx`` wide and ``ny`` tall, with the top row at ``ymax``."""
    pixels = label_levels(grid.labels, grid.n_roots).T[::-1, :]
    with open(path, "wb") as file:
        file.write(f"P5\n{grid.nx} {grid.ny}\n{PGM_MAXVAL}\n".encode("ascii"))
        file.write(np.ascontiguousarray(pixels).tobytes())
    logger.debug(f"Wrote {path}")


def stats_payload(stats: BasinStats, **context: Any) -> Dict[str, Any]:
    """JSON body of a basin summary; ``context`` keys come first, in the order given."""
    payload: Dict[str, Any] = dict(context)
    payload.update(
        {
            "cells": stats.cells,
            "unconverged_fraction": stats.unconverged_fraction,
            "unregistered_fraction": stats.unregistered_fraction,
            "mean_iterations": stats.mean_iterations,
            "fractions": {str(k): v for k, v in sorted(stats.fractions.items())},
        }
    )
    return payload


def dump_json(payload: Mapping[str, Any]) -> str:
    """Serialise a payload with keys in insertion order and a trailing newline."""
    return json.dumps(json_safe(payload), indent=2, allow_nan=False) + "\n"


def write_json(payload: Mapping[str, Any], path: Union[str, Path]) -> None:
    """Write ``dump_json(payload)`` to ``path``."""
    with open(path, "w", newline="\n", encoding="utf-8") as file:
        file.write(dump_json(payload))
    logger.debug(f"Wrote {path}")


def render_report(template_name: str = REPORT_TEMPLATE, **context: Any) -> str:
    """Render a Markdown report from the templates directory."""
    with open(TEMPLATES_DIR / template_name, "r", encoding="utf-8") as file:
        template = Template(file.read(), keep_trailing_newline=True)
    return template.render(**context)


def write_report(path: Union[str, Path], **context: Any) -> None:
    """Render the report template with ``context`` and write it to ``path``."""
    rendered = render_report(**context)
    with open(path, "w", newline="\n", encoding="utf-8") as file:
        file.write(rendered)
    logger.info(f"Report written to {path}")

#!/usr/bin/env python3
# Copyright 2022 Canonical Ltd.
# See LICENSE file for licensing details.

import logging

import pytest

from .helpers import (
    CELL_TOLERANCE,
    DN_ROW,
    HAND_MAP_CELLS,
    NR_ROW,
    SLOW_CELL_TOLERANCE,
    TABLE_X0S,
    W4_ROW,
    hand_w4_iterations,
    read_table,
    run_cli,
)

logger = logging.getLogger(__name__)


@pytest.fixture(scope="module")
def table(tmp_path_factory):
    """Iteration table of simple1d for nr, dn and w4 at the default settings."""
    out = tmp_path_factory.mktemp("table") / "table.csv"
    code, _, _ = run_cli(["table", "--problem", "simple1d", "--out", str(out)])
    assert code == 0
    text = out.read_text()
    logger.info(f"\n{text}")
    return text


def test_header(table):
    header = table.splitlines()[0].split(",")
    assert header[0] == "method"
    assert [float(v) for v in header[1:]] == list(TABLE_X0S)


def test_newton_row(table):
    assert read_table(table)["nr"] == list(NR_ROW)


def test_damped_newton_row(table):
    row = read_table(table)["dn"]
    for x0, count, expected in zip(TABLE_X0S, row, DN_ROW):
        if expected is None:
            assert count is None, f"dn from {x0} should not converge"
        else:
            assert count is not None and abs(count - expected) <= CELL_TOLERANCE, (x0, count)


def test_w4_row(table):
    row = read_table(table)["w4"]
    assert None not in row
    for x0, count, expected in zip(TABLE_X0S, row, W4_ROW):
        if x0 in HAND_MAP_CELLS:
            assert count == hand_w4_iterations(x0), (x0, count)
            continue
        tolerance = SLOW_CELL_TOLERANCE if expected > 1000 else CELL_TOLERANCE
        assert abs(count - expected) <= tolerance, (x0, count)


def test_stdout_matches_file(table):
    code, stdout, _ = run_cli(["table", "--problem", "simple1d"])
    assert code == 0
    assert stdout == table


def test_single_runs_agree(table):
    w4 = read_table(table)["w4"]
    for x0, count in zip(TABLE_X0S, w4):
        code, stdout, _ = run_cli(["solve", "--method", "w4", f"--x0={x0}"])
        assert code == 0
        assert f'"iterations": {count},' in stdout

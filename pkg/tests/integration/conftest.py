# Copyright 2022 Canonical Ltd.
# See LICENSE file for licensing details.

import pytest

from .helpers import GRID_SIZE


def pytest_addoption(parser):
    """Parse additional pytest options."""
    parser.addoption("--grid-size", action="store", type=int, default=GRID_SIZE)


@pytest.fixture(scope="module")
def grid_size(request) -> int:
    """Cells per axis of the basin scans."""
    return request.config.getoption("--grid-size", default=GRID_SIZE)

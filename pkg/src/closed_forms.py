#!/usr/bin/env python3
# Copyright 2022 Canonical Ltd.
# See LICENSE file for licensing details.

"""Hand-expanded iteration maps for the benchmark problems.

These write the NR/DN and W4-UDL maps out component by component, with the inverses of the
Jacobian factors worked out symbolically. They share no code with ``solvers`` and serve as
independent references for it. Arguments may be scalars or numpy arrays of any common shape.
"""

from typing import Tuple

import numpy as np
from numpy.typing import ArrayLike

from literals import DAMPING_C

Pair = Tuple[np.ndarray, np.ndarray]
Quad = Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]


def simple1d_w4_map(x: ArrayLike, p: ArrayLike, dtau: float) -> Pair:
    """W4 map of ``arctan(x) + sin(x) - 1 = 0`` with X = 1 and Y = 1 / f'(x)."""
    x = np.asarray(x, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    f = np.arctan(x) + np.sin(x) - 1.0
    df = 1.0 / (1.0 + x * x) + np.cos(x)
    return x + dtau * p, (1.0 - DAMPING_C * dtau) * p - dtau * f / df


def _simple2d_residual(x: np.ndarray, y: np.ndarray) -> Pair:
    return x * x + y * y - 4.0, x * x * y - 1.0


def simple2d_nr_map(x: ArrayLike, y: ArrayLike, dtau: float) -> Pair:
    """NR (``dtau = 1``) or DN map of simple2d, singular on ``x = 0`` and ``x^2 = 2 y^2``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    f1, f2 = _simple2d_residual(x, y)
    s = x * x - 2.0 * y * y
    x_next = x - dtau * (x / (2.0 * s) * f1 - y / (x * s) * f2)
    y_next = y - dtau * (-y / s * f1 + f2 / s)
    return x_next, y_next


def simple2d_w4_map(x: ArrayLike, y: ArrayLike, p: ArrayLike, q: ArrayLike, dtau: float) -> Quad:
    """W4-UDL map of simple2d, returning ``(x, y, p, q)`` at the next step."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    f1, f2 = _simple2d_residual(x, y)
    s = x * x - 2.0 * y * y
    damp = 1.0 - DAMPING_C * dtau
    return (
        x + dtau * p,
        y + dtau * (-2.0 * y / x * p + q),
        damp * p - dtau * (x / (2.0 * s) * f1 - y / (x * s) * f2),
        damp * q - dtau / (x * x) * f2,
    )


def _oproblem_residual(x: np.ndarray, y: np.ndarray) -> Pair:
    return x * x - y * y - 4.0 * x + 6.0, 2.0 * x * y + 4.0 * y - 2.0


def oproblem_nr_map(x: ArrayLike, y: ArrayLike, dtau: float) -> Pair:
    """NR or DN map of oproblem, singular on the circle ``x^2 + y^2 = 4``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    f1, f2 = _oproblem_residual(x, y)
    scale = dtau / (2.0 * (x * x + y * y - 4.0))
    x_next = x - scale * ((x + 2.0) * f1 + y * f2)
    y_next = y - scale * (-y * f1 + (x - 2.0) * f2)
    return x_next, y_next


def oproblem_w4_map(
    x: ArrayLike,
    y: ArrayLike,
    p: ArrayLike,
    q: ArrayLike,
    dtau: float,
    as_printed: bool = False,
) -> Quad:
    """W4-UDL map of oproblem.

    The lower factor of the Jacobian has ``y / (x + 2)`` below its diagonal, so its inverse
    moves ``y`` by ``-y / (x + 2) p``. With ``as_printed`` the opposite sign is used instead,
    which is how the map is usually quoted for this problem; it is a different iteration.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    f1, f2 = _oproblem_residual(x, y)
    coupling = y / (x + 2.0)
    sign = 1.0 if as_printed else -1.0
    damp = 1.0 - DAMPING_C * dtau
    return (
        x + dtau * p,
        y + dtau * (sign * coupling * p + q),
        damp * p - dtau * (x + 2.0) / (2.0 * (x * x + y * y - 4.0)) * (f1 + coupling * f2),
        damp * q - dtau / (2.0 * (x + 2.0)) * f2,
    )

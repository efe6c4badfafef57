#!/usr/bin/env python3
# Copyright 2022 Canonical Ltd.
# See LICENSE file for licensing details.

"""Newton basins: which root each initial guess of a grid ends up at."""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from core import SolverConfig, Status
from exceptions import InvalidConfigError
from literals import (
    BASIN_GRID_SIZE,
    BASIN_MAX_ITER,
    CLASSIFY_RADIUS,
    UNCONVERGED_LABEL,
    UNREGISTERED_LABEL,
)
from problems import Domain, Problem
from solvers import run_batch

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BasinGrid:
    """Labels and iteration counts over a uniform grid of initial guesses.

    Attributes:
        domain: ``((xmin, xmax), (ymin, ymax))``.
        nx: number of cells along x; the first index of ``labels``.
        ny: number of cells along y; the second index of ``labels``.
        labels: ``0`` for runs that did not converge, ``k >= 1`` for the k-th known root
            (registry order), ``-1`` for convergence to a point that is not registered.
        iters: iterations performed by each run.
        n_roots: number of known roots K.
    """

    domain: Domain
    nx: int
    ny: int
    labels: NDArray[np.int64] = field(repr=False)
    iters: NDArray[np.int64] = field(repr=False)
    n_roots: int = 0

    def cell_centers(self) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Return the x and y coordinates of the cell centres."""
        return cell_centers(self.domain, self.nx, self.ny)


def _axis_centers(bounds: Tuple[float, float], n: int) -> NDArray[np.float64]:
    low, high = bounds
    mid = 0.5 * (low + high)
    step = (high - low) / n
    # offsets are exact half-integers, so symmetric domains give exactly mirrored centres
    return mid + (np.arange(n) + 0.5 - 0.5 * n) * step


def cell_centers(
    domain: Domain, nx: int, ny: int
) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Cell-centre coordinates of an ``nx`` by ``ny`` grid over ``domain``."""
    return _axis_centers(domain[0], nx), _axis_centers(domain[1], ny)


def _nearest_labels(x: NDArray[np.float64], roots: Sequence[ArrayLike]) -> NDArray[np.int64]:
    roots = np.asarray(roots, dtype=np.float64).reshape(len(roots), -1)
    with np.errstate(invalid="ignore", over="ignore"):
        distances = np.sqrt(np.sum((x[:, None, :] - roots[None, :, :]) ** 2, axis=-1))
    nearest = np.argmin(np.where(np.isnan(distances), np.inf, distances), axis=-1)
    close = distances[np.arange(x.shape[0]), nearest] < CLASSIFY_RADIUS
    return np.where(close, nearest + 1, UNREGISTERED_LABEL)


def classify(x_final: ArrayLike, roots: Sequence[ArrayLike], status: Status) -> int:
    """Label one final position.

    Returns:
        0 when the run did not converge; otherwise the 1-based index of the nearest root if
        it lies within 1e-3 (Euclidean), else -1.
    """
    if not roots:
        raise InvalidConfigError("classify needs at least one root")
    if Status(status) is not Status.CONVERGED:
        return UNCONVERGED_LABEL
    x = np.asarray(x_final, dtype=np.float64).reshape(1, -1)
    return int(_nearest_labels(x, roots)[0])


def scan_points(
    problem: Problem, config: SolverConfig, points: ArrayLike
) -> Tuple[NDArray[np.int64], NDArray[np.int64]]:
    """Run the solver from every row of ``points`` and label where each run ended.

    Returns:
        ``(labels, iterations)``, one entry per point.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, problem.dim)
    result = run_batch(problem, config, points)
    labels = np.full(points.shape[0], UNCONVERGED_LABEL, dtype=np.int64)
    converged = result.converged
    if np.any(converged):
        if problem.known_roots:
            labels[converged] = _nearest_labels(result.x[converged], problem.known_roots)
        else:
            labels[converged] = UNREGISTERED_LABEL
    return labels, result.iterations


def basin_config(
    method, dtau: Optional[float] = None, tol: Optional[float] = None
) -> SolverConfig:
    """Solver settings for basin scans: the method defaults with a 1000-iteration cap."""
    kwargs = {} if tol is None else {"tol": tol}
    return SolverConfig.for_method(method, dtau=dtau, max_iter=BASIN_MAX_ITER, **kwargs)


def compute_basin(
    problem: Problem,
    config: SolverConfig,
    domain: Optional[Domain] = None,
    nx: int = BASIN_GRID_SIZE,
    ny: int = BASIN_GRID_SIZE,
) -> BasinGrid:
    """Scan a uniform grid of initial guesses, sampled at cell centres.

    Args:
        problem: a two-dimensional problem.
        config: solver settings, used as given; ``basin_config`` builds the usual ones.
        domain: per-axis bounds, the problem's default domain when omitted.
        nx: cells along x, at least 2.
        ny: cells along y, at least 2.

    Raises:
        InvalidConfigError: the problem is not 2-D or the grid is too small.
    """
    if problem.dim != 2:
        raise InvalidConfigError(f"Basins need a 2-D problem, {problem.name} has {problem.dim}")
    if nx < 2 or ny < 2:
        raise InvalidConfigError(f"Grid must be at least 2x2, got {nx}x{ny}")
    domain = tuple(tuple(map(float, bounds)) for bounds in (domain or problem.default_domain))
    for low, high in domain:
        if not low < high:
            raise InvalidConfigError(f"Empty domain axis [{low}, {high}]")

    xs, ys = cell_centers(domain, nx, ny)
    grid_x, grid_y = np.meshgrid(xs, ys, indexing="ij")
    points = np.stack([grid_x.ravel(), grid_y.ravel()], axis=-1)

    logger.info(
        f"Scanning {nx}x{ny} basin of {problem.name} with {config.method.value} "
        f"(dtau={config.dtau}, max_iter={config.max_iter})"
    )
    labels, iters = scan_points(problem, config, points)
    return BasinGrid(
        domain=domain,
        nx=nx,
        ny=ny,
        labels=labels.reshape(nx, ny),
        iters=iters.reshape(nx, ny),
        n_roots=len(problem.known_roots),
    )


@dataclass(frozen=True)
class BasinStats:
    """Summary of a basin grid.

    ``fractions`` maps every possible label (-1, 0, 1..K) to its share of cells.
    """

    fractions: Dict[int, float]
    unconverged_fraction: float
    unregistered_fraction: float
    mean_iterations: float
    cells: int


def basin_stats(grid: BasinGrid) -> BasinStats:
    """Per-label cell fractions and the mean iteration count among converged cells."""
    labels = np.asarray(grid.labels).ravel()
    cells = labels.size
    keys = [UNREGISTERED_LABEL, UNCONVERGED_LABEL] + list(range(1, grid.n_roots + 1))
    fractions = {k: int(np.count_nonzero(labels == k)) / cells for k in keys}
    converged = labels != UNCONVERGED_LABEL
    if np.any(converged):
        mean_iterations = float(np.mean(np.asarray(grid.iters).ravel()[converged]))
    else:
        mean_iterations = float("nan")
    return BasinStats(
        fractions=fractions,
        unconverged_fraction=fractions[UNCONVERGED_LABEL],
        unregistered_fraction=fractions[UNREGISTERED_LABEL],
        mean_iterations=mean_iterations,
        cells=cells,
    )


def mirror_labels(labels: ArrayLike, swap: Dict[int, int]) -> NDArray[np.int64]:
    """Reflect a label array along its first axis (x -> -x) and exchange paired roots."""
    mirrored = np.asarray(labels)[::-1, :].copy()
    out = mirrored.copy()
    for a, b in swap.items():
        out[mirrored == a] = b
    return out


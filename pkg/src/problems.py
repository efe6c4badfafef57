#!/usr/bin/env python3
# Copyright 2022 Canonical Ltd.
# See LICENSE file for licensing details.

"""Registry of benchmark systems.

Residuals and Jacobians take positions of shape ``(..., N)`` and return ``(..., N)`` and
``(..., N, N)``. They hold no state, so a Problem can be shared freely between scans.
"""

import importlib
import logging
from dataclasses import dataclass, field
from functools import lru_cache, partial
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike

from core import Matrix, Vector, batch_inf_norm, frozen_array
from exceptions import UnknownProblemError
from linalg import udl_decompose, udl_solve
from literals import FD_REL_STEP, ROOT_REFINE_MAX_ITER, ROOT_REFINE_TOL, USER_DOMAIN

logger = logging.getLogger(__name__)

ResidualFn = Callable[[Vector], Vector]
JacobianFn = Callable[[Vector], Matrix]
Domain = Tuple[Tuple[float, float], ...]


@dataclass(frozen=True)
class Problem:
    """A nonlinear system ``F(x) = 0`` with everything the solvers and scans need.

    Attributes:
        name: stable identifier, also used on the command line.
        dim: number of unknowns N.
        residual: the map F.
        jacobian: analytic Jacobian, or central differences for user problems.
        known_roots: refined roots used for classification, in registry order.
        default_domain: per-axis ``(min, max)`` bounds for basin scans.
        symmetric_jacobian: whether J is symmetric everywhere (eigen maps need it).
        printed_roots: the seeds the roots were refined from.
    """

    name: str
    dim: int
    residual: ResidualFn = field(repr=False)
    jacobian: JacobianFn = field(repr=False)
    known_roots: Tuple[Vector, ...] = ()
    default_domain: Domain = ()
    symmetric_jacobian: bool = False
    printed_roots: Tuple[Vector, ...] = field(default=(), repr=False)


def fd_jacobian(residual: ResidualFn, x: ArrayLike, h: Optional[float] = None) -> Matrix:
    """Approximate the Jacobian by central differences, one column at a time.

    Args:
        residual: the map F, batched over leading axes.
        x: point or stack of points, shape ``(..., N)``.
        h: fixed step; by default ``1e-6 * max(1, |x_j|)`` per coordinate.

    Returns:
        ``J[..., i, j] ~ (F_i(x + h e_j) - F_i(x - h e_j)) / 2h``. Non-finite residual
        evaluations show up as non-finite entries.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    columns = []
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        for j in range(n):
            step = h if h is not None else FD_REL_STEP * np.maximum(1.0, np.abs(x[..., j]))
            forward = x.copy()
            backward = x.copy()
            forward[..., j] = x[..., j] + step
            backward[..., j] = x[..., j] - step
            spread = forward[..., j] - backward[..., j]
            columns.append(
                (residual(forward) - residual(backward)) / np.asarray(spread)[..., None]
            )
    return np.stack(columns, axis=-1)


def _refine_roots(
    residual: ResidualFn, jacobian: JacobianFn, seeds: Sequence[ArrayLike], name: str
) -> Tuple[Vector, ...]:
    """Polish printed roots with plain Newton steps down to a 1e-14 residual."""
    refined = []
    for seed in seeds:
        x = np.array(seed, dtype=np.float64)
        norm = float(batch_inf_norm(residual(x)))
        for _ in range(ROOT_REFINE_MAX_ITER):
            if norm < ROOT_REFINE_TOL:
                break
            candidate = x - udl_solve(udl_decompose(jacobian(x)), residual(x))
            candidate_norm = float(batch_inf_norm(residual(candidate)))
            if not candidate_norm < norm:
                break
            x, norm = candidate, candidate_norm
        if norm >= ROOT_REFINE_TOL:
            logger.warning(
                f"Root of {name} seeded at {list(seed)} only refined to residual {norm:.3e}"
            )
        refined.append(frozen_array(x))
    return tuple(refined)


def _make_problem(
    name: str,
    dim: int,
    residual: ResidualFn,
    jacobian: JacobianFn,
    seeds: Sequence[Sequence[float]],
    domain: Domain,
    symmetric: bool = False,
) -> Problem:
    return Problem(
        name=name,
        dim=dim,
        residual=residual,
        jacobian=jacobian,
        known_roots=_refine_roots(residual, jacobian, seeds, name),
        default_domain=domain,
        symmetric_jacobian=symmetric,
        printed_roots=tuple(frozen_array(seed) for seed in seeds),
    )


def _simple1d_residual(v: Vector) -> Vector:
    x = v[..., 0]
    return (np.arctan(x) + np.sin(x) - 1.0)[..., None]


def _simple1d_jacobian(v: Vector) -> Matrix:
    x = v[..., 0]
    return (1.0 / (1.0 + x * x) + np.cos(x))[..., None, None]


def _simple2d_residual(v: Vector) -> Vector:
    x, y = v[..., 0], v[..., 1]
    return np.stack([x * x + y * y - 4.0, x * x * y - 1.0], axis=-1)


def _simple2d_jacobian(v: Vector) -> Matrix:
    x, y = v[..., 0], v[..., 1]
    return np.stack(
        [np.stack([2.0 * x, 2.0 * y], axis=-1), np.stack([2.0 * x * y, x * x], axis=-1)],
        axis=-2,
    )


def _oproblem_residual(v: Vector) -> Vector:
    x, y = v[..., 0], v[..., 1]
    return np.stack([x * x - y * y - 4.0 * x + 6.0, 2.0 * x * y + 4.0 * y - 2.0], axis=-1)


def _oproblem_jacobian(v: Vector) -> Matrix:
    x, y = v[..., 0], v[..., 1]
    return np.stack(
        [
            np.stack([2.0 * (x - 2.0), -2.0 * y], axis=-1),
            np.stack([2.0 * y, 2.0 * (x + 2.0)], axis=-1),
        ],
        axis=-2,
    )


def _fproblem0_residual(v: Vector) -> Vector:
    x, y = v[..., 0], v[..., 1]
    return np.stack([x * x + x * y * y - 4.0, x * x * y - 1.0], axis=-1)


def _fproblem0_jacobian(v: Vector) -> Matrix:
    x, y = v[..., 0], v[..., 1]
    return np.stack(
        [
            np.stack([2.0 * x + y * y, 2.0 * x * y], axis=-1),
            np.stack([2.0 * x * y, x * x], axis=-1),
        ],
        axis=-2,
    )


def _simple1d() -> Problem:
    # roots on the positive axis; the equation has none for x <= 0
    return _make_problem(
        "simple1d",
        1,
        _simple1d_residual,
        _simple1d_jacobian,
        seeds=[[0.534], [3.434], [5.869], [9.917], [12.05]],
        domain=((-3.0, 3.0),),
    )


def _simple2d() -> Problem:
    return _make_problem(
        "simple2d",
        2,
        _simple2d_residual,
        _simple2d_jacobian,
        seeds=[
            [1.9837924, 0.25410169],
            [-1.9837924, 0.25410169],
            [0.73307679, 1.8608059],
            [-0.73307679, 1.8608059],
        ],
        domain=((-5.0, 5.0), (-5.0, 5.0)),
    )


def _oproblem() -> Problem:
    return _make_problem(
        "oproblem",
        2,
        _oproblem_residual,
        _oproblem_jacobian,
        seeds=[[-1.7505169, 4.0082886], [-2.2244718, -4.4549031]],
        domain=((-10.0, 10.0), (-10.0, 10.0)),
    )


def _fproblem0() -> Problem:
    return _make_problem(
        "fproblem0",
        2,
        _fproblem0_residual,
        _fproblem0_jacobian,
        seeds=[
            [-2.0296789, 0.24274223],
            [1.9668697, 0.25849302],
            [0.65417501, 2.3367492],
        ],
        domain=((-5.0, 5.0), (-5.0, 5.0)),
        symmetric=True,
    )


_BUILDERS = {
    "simple1d": _simple1d,
    "simple2d": _simple2d,
    "oproblem": _oproblem,
    "fproblem0": _fproblem0,
}
BUILTIN_NAMES = tuple(_BUILDERS)


@lru_cache(maxsize=None)
def builtin(name: str) -> Problem:
    """Return one of the registered benchmark problems.

    Raises:
        UnknownProblemError: ``name`` is not registered.
    """
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise UnknownProblemError(name, BUILTIN_NAMES)
    problem = builder()
    logger.debug(f"Built problem {name} with {len(problem.known_roots)} known roots")
    return problem


def user_problem(
    name: str,
    residual: ResidualFn,
    dim: int,
    domain: Optional[Domain] = None,
    known_roots: Sequence[ArrayLike] = (),
    jacobian: Optional[JacobianFn] = None,
    symmetric_jacobian: bool = False,
) -> Problem:
    """Wrap a user residual into a Problem, backing the Jacobian by central differences."""
    if jacobian is None:
        jacobian = partial(fd_jacobian, residual)
    roots = tuple(frozen_array(root) for root in known_roots)
    return Problem(
        name=name,
        dim=dim,
        residual=residual,
        jacobian=jacobian,
        known_roots=roots,
        default_domain=domain if domain is not None else (USER_DOMAIN,) * dim,
        symmetric_jacobian=symmetric_jacobian,
        printed_roots=roots,
    )


def resolve(name: str) -> Problem:
    """Look a problem up by builtin name or by a ``module:callable`` import path.

    The callable is invoked without arguments and must return a Problem.
    """
    if ":" not in name:
        return builtin(name)
    module_name, _, attribute = name.partition(":")
    try:
        factory = getattr(importlib.import_module(module_name), attribute)
    except (ImportError, AttributeError) as e:
        logger.error(f"Cannot load problem factory {name}: {e}")
        raise UnknownProblemError(name, BUILTIN_NAMES)
    problem = factory() if callable(factory) else factory
    if not isinstance(problem, Problem):
        raise UnknownProblemError(name, BUILTIN_NAMES)
    return problem

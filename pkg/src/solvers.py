#!/usr/bin/env python3
# Copyright 2022 Canonical Ltd.
# See LICENSE file for licensing details.

"""Iteration maps and the fixed-point drivers.

Every map works on stacks of states: ``x`` and ``p`` have shape ``(..., N)`` (``p`` is
``(..., 0)`` for first-order maps) and the map returns the next ``x``, ``p`` and a flag per
state telling whether the Jacobian could not be factored there. ``run`` drives one initial
guess and keeps a trace; ``run_batch`` drives many at once for basin scans, applying the very
same map functions to the still-active rows.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from core import (
    MethodKind,
    SolverConfig,
    SolverResult,
    SolverState,
    Status,
    TraceRecord,
    Vector,
    batch_inf_norm,
    residual_inf_norm,
    status_of,
)
from exceptions import InvalidConfigError, UnsupportedMethodError
from linalg import (
    eigen_preconditioner,
    matvec,
    solve_unit_lower,
    solve_upper_diag,
    sym2_eigen,
    udl_decompose,
    udl_solve,
)
from literals import DAMPING_C
from problems import Problem

logger = logging.getLogger(__name__)

StepMap = Callable[[Problem, Vector, Vector, float], Tuple[Vector, Vector, NDArray[np.bool_]]]


def _newton_map(problem: Problem, x: Vector, p: Vector, dtau: float):
    factors = udl_decompose(problem.jacobian(x), strict=False)
    increment = udl_solve(factors, problem.residual(x))
    return x - dtau * increment, p, factors.singular


def _w4_udl_map(problem: Problem, x: Vector, p: Vector, dtau: float):
    factors = udl_decompose(problem.jacobian(x), strict=False)
    force = solve_upper_diag(factors.u, factors.d, problem.residual(x), strict=False)
    x_next = x + dtau * solve_unit_lower(factors.l, p)
    p_next = (1.0 - DAMPING_C * dtau) * p - dtau * force
    return x_next, p_next, factors.singular


def _dn_eigen_map(problem: Problem, x: Vector, p: Vector, dtau: float):
    pre = eigen_preconditioner(sym2_eigen(problem.jacobian(x)))
    projected = pre.lambda_inv * matvec(pre.p_inv, problem.residual(x))
    return x - dtau * matvec(pre.p, projected), p, np.zeros(x.shape[:-1], dtype=bool)


def _w4_eigen_map(problem: Problem, x: Vector, p: Vector, dtau: float):
    pre = eigen_preconditioner(sym2_eigen(problem.jacobian(x)))
    force = pre.lambda_inv * matvec(pre.p_inv, problem.residual(x))
    x_next = x + dtau * matvec(pre.p, p)
    p_next = (1.0 - DAMPING_C * dtau) * p - dtau * force
    return x_next, p_next, np.zeros(x.shape[:-1], dtype=bool)


_MAPS: Dict[MethodKind, StepMap] = {
    MethodKind.NR: _newton_map,
    MethodKind.DN: _newton_map,
    MethodKind.W4_UDL: _w4_udl_map,
    MethodKind.W4_EIGEN: _w4_eigen_map,
    MethodKind.DN_EIGEN: _dn_eigen_map,
}


def check_supported(problem: Problem, method: MethodKind) -> None:
    """Reject eigen-preconditioned maps on problems they are not defined for.

    Raises:
        UnsupportedMethodError: the method needs a 2-D problem with symmetric Jacobian.
    """
    if method.eigen and (problem.dim != 2 or not problem.symmetric_jacobian):
        raise UnsupportedMethodError(
            method.value, problem.name, "needs dim = 2 and a symmetric Jacobian"
        )


def _check_dtau(dtau: float, allow_one: bool) -> None:
    if not (0.0 < dtau < 1.0 or (allow_one and dtau == 1.0)):
        bound = "(0, 1]" if allow_one else "(0, 1)"
        raise InvalidConfigError(f"dtau must lie in {bound}, got {dtau}")


def _as_position(problem: Problem, x: ArrayLike) -> Vector:
    x = np.array(x, dtype=np.float64).reshape(-1)
    if x.size != problem.dim:
        raise InvalidConfigError(f"{problem.name} has dimension {problem.dim}, got {x.size}")
    return x


def nr_dn_step(problem: Problem, x: ArrayLike, dtau: float) -> Vector:
    """Apply ``x - dtau J^-1 F(x)`` once; ``dtau = 1`` is Newton-Raphson.

    Raises:
        SingularDecompositionError: J(x) cannot be factored.
    """
    _check_dtau(dtau, allow_one=True)
    x = _as_position(problem, x)
    udl_decompose(problem.jacobian(x))
    x_next, _, _ = _newton_map(problem, x, np.zeros(0), dtau)
    return x_next


def w4_udl_step(problem: Problem, state: SolverState, dtau: float) -> SolverState:
    """Apply the UDL-preconditioned W4 map once.

    ``x' = x + dtau L^-1 p`` and ``p' = (1 - 2 dtau) p - dtau D^-1 U^-1 F(x)``, with the
    factors taken at the current ``x``.

    Raises:
        SingularDecompositionError: J(x) has no UDL factorization.
    """
    _check_dtau(dtau, allow_one=False)
    x = _as_position(problem, state.x)
    udl_decompose(problem.jacobian(x))
    x_next, p_next, _ = _w4_udl_map(problem, x, np.array(state.p), dtau)
    return SolverState(x_next, p_next)


def w4_eigen_step(problem: Problem, state: SolverState, dtau: float) -> SolverState:
    """Apply the eigen-preconditioned W4 map once (2-D symmetric Jacobians only)."""
    check_supported(problem, MethodKind.W4_EIGEN)
    _check_dtau(dtau, allow_one=False)
    x = _as_position(problem, state.x)
    with np.errstate(all="ignore"):
        x_next, p_next, _ = _w4_eigen_map(problem, x, np.array(state.p), dtau)
    return SolverState(x_next, p_next)


def dn_eigen_step(problem: Problem, x: ArrayLike, dtau: float) -> Vector:
    """Apply ``x - dtau P Lambda^-1 P^-1 F(x)`` once (2-D symmetric Jacobians only)."""
    check_supported(problem, MethodKind.DN_EIGEN)
    _check_dtau(dtau, allow_one=True)
    x = _as_position(problem, x)
    with np.errstate(all="ignore"):
        x_next, _, _ = _dn_eigen_map(problem, x, np.zeros(0), dtau)
    return x_next


def run(problem: Problem, config: SolverConfig, x0: ArrayLike) -> SolverResult:
    """Iterate the configured map from ``x0`` (with zero momentum) until it stops.

    The residual is checked on the initial state and after every map application. The run
    ends on a residual below ``tol``, a non-finite state or residual, a Jacobian that cannot
    be factored, or ``max_iter`` applications. Failures are reported through the status.
    """
    check_supported(problem, config.method)
    step = _MAPS[config.method]
    x = _as_position(problem, x0)
    p = np.zeros_like(x) if config.method.second_order else np.zeros(0)

    trace: List[TraceRecord] = []
    iteration = 0
    with np.errstate(all="ignore"):
        residual = residual_inf_norm(problem.residual(x))
        trace.append(TraceRecord(iteration, x, p, residual))
        status = status_of(_finite(x, p), residual, config.tol, False, False)
        while status is None:
            x_next, p_next, singular = step(problem, x, p, config.dtau)
            if bool(singular):
                status = Status.SINGULAR_DECOMPOSITION
                break
            iteration += 1
            x, p = x_next, p_next
            residual = residual_inf_norm(problem.residual(x))
            trace.append(TraceRecord(iteration, x, p, residual))
            status = status_of(
                _finite(x, p), residual, config.tol, False, iteration >= config.max_iter
            )

    logger.info(
        f"{problem.name} {config.method.value} from {trace[0].x.tolist()}: "
        f"{status.value} after {iteration} iterations (residual {residual:.3e})"
    )
    return SolverResult(
        status=status, final_state=SolverState(x, p), iterations=iteration, trace=trace
    )


def _finite(x: Vector, p: Vector) -> bool:
    return bool(np.all(np.isfinite(x)) and np.all(np.isfinite(p)))


_STATUS_CODES: Tuple[Status, ...] = tuple(Status)
_RUNNING = -1


def _code(status: Status) -> int:
    return _STATUS_CODES.index(status)


@dataclass(frozen=True)
class BatchResult:
    """Outcome of many runs, one row per initial guess."""

    codes: NDArray[np.int8]
    iterations: NDArray[np.int64]
    x: NDArray[np.float64]
    p: NDArray[np.float64]

    @property
    def statuses(self) -> List[Status]:
        """Status of each run."""
        return [_STATUS_CODES[code] for code in self.codes]

    @property
    def converged(self) -> NDArray[np.bool_]:
        """Per-run convergence flag."""
        return self.codes == _code(Status.CONVERGED)


def _decide(
    finite: NDArray[np.bool_], residual: NDArray[np.float64], tol: float, exhausted: bool
) -> NDArray[np.int8]:
    """Vectorised ``status_of`` for states that moved this iteration."""
    codes = np.full(residual.shape, _RUNNING, dtype=np.int8)
    if exhausted:
        codes[:] = _code(Status.MAX_ITER_EXCEEDED)
    codes[residual < tol] = _code(Status.CONVERGED)
    codes[~finite | ~np.isfinite(residual)] = _code(Status.DIVERGED)
    return codes


def run_batch(problem: Problem, config: SolverConfig, x0s: ArrayLike) -> BatchResult:
    """Run the configured map from every row of ``x0s`` without keeping traces.

    Each row follows exactly the arithmetic of ``run``: the same map functions are applied to
    the rows that are still iterating, so statuses, iteration counts and final positions agree
    with single runs.
    """
    check_supported(problem, config.method)
    step = _MAPS[config.method]
    x = np.array(x0s, dtype=np.float64).reshape(-1, problem.dim)
    width = problem.dim if config.method.second_order else 0
    p = np.zeros((x.shape[0], width))
    iterations = np.zeros(x.shape[0], dtype=np.int64)

    with np.errstate(all="ignore"):
        finite = np.all(np.isfinite(x), axis=-1)
        codes = _decide(finite, batch_inf_norm(problem.residual(x)), config.tol, False)
        for k in range(1, config.max_iter + 1):
            active = np.flatnonzero(codes == _RUNNING)
            if active.size == 0:
                break
            x_next, p_next, singular = step(problem, x[active], p[active], config.dtau)
            codes[active[singular]] = _code(Status.SINGULAR_DECOMPOSITION)
            moved = active[~singular]
            x[moved] = x_next[~singular]
            p[moved] = p_next[~singular]
            iterations[moved] = k
            finite = np.all(np.isfinite(x[moved]), axis=-1) & np.all(
                np.isfinite(p[moved]), axis=-1
            )
            residual = batch_inf_norm(problem.residual(x[moved]))
            codes[moved] = _decide(finite, residual, config.tol, k >= config.max_iter)

    result = BatchResult(codes=codes, iterations=iterations, x=x, p=p)
    logger.info(
        f"{problem.name} {config.method.value}: {int(np.sum(result.converged))} of "
        f"{x.shape[0]} initial guesses converged"
    )
    return result

#!/usr/bin/env python3
# Copyright 2022 Canonical Ltd.
# See LICENSE file for licensing details.

"""Checks of the convergence theory behind the iteration maps.

Covers the spectrum of the linearised W4 error map, the eigen-structure of symmetric 2x2
Jacobians along a run, the small-x expansions of fproblem0's eigen-pairs, and the scalar
error recurrence together with its closed form.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from core import SolverConfig, SolverResult, Vector
from exceptions import InvalidConfigError, UnsupportedMethodError
from linalg import (
    assemble_w_matrix,
    eigen_preconditioner,
    solve_unit_lower,
    solve_upper_diag,
    sym2_eigen,
    udl_decompose,
    udl_solve,
)
from literals import (
    RECONSTRUCTION_TOL,
    RECURRENCE_STEPS,
    RECURRENCE_TOL,
    SERIES_C,
    SPECTRUM_EIG_TOL,
    SPECTRUM_NILPOTENT_TOL,
)
from problems import Problem, builtin
from solvers import run

logger = logging.getLogger(__name__)


class Preconditioner(str, Enum):
    """Choice of ``(X, Y)`` in the W matrix; every variant satisfies ``Y = X^-1 J^-1``."""

    UDL = "udl"
    EIGEN = "eigen"
    INVERSE = "inverse"


@dataclass(frozen=True)
class SpectrumCheck:
    """Spectrum of an error-propagation matrix against the expected value ``1 - dtau``.

    ``nilpotency_residual`` measures how far ``W - (1 - dtau) I`` is from squaring to zero
    (first power for the first-order map), scaled by the matching power of ``dtau``. The
    computed eigenvalues of a defective matrix scatter by about the square root of machine
    precision, so the residual is the sharp test and the eigenvalues the coarse one.
    """

    eigenvalues: NDArray[np.complex128]
    expected: float
    max_deviation: float
    nilpotency_residual: float

    @property
    def passed(self) -> bool:
        """Whether both the eigenvalue and the residual test hold."""
        return (
            self.max_deviation < SPECTRUM_EIG_TOL
            and self.nilpotency_residual < SPECTRUM_NILPOTENT_TOL
        )


def _preconditioner_blocks(j: NDArray[np.float64], kind: Preconditioner):
    n = j.shape[-1]
    eye = np.eye(n)
    if kind is Preconditioner.UDL:
        factors = udl_decompose(j)
        # rows of the solves are the columns of the inverses
        x = solve_unit_lower(factors.l, eye).T
        y = solve_upper_diag(factors.u, factors.d, eye).T
        return x, y
    if kind is Preconditioner.EIGEN:
        if n != 2 or not np.array_equal(j, j.T):
            raise UnsupportedMethodError(
                kind.value, "w-spectrum", "needs a symmetric 2x2 Jacobian"
            )
        pre = eigen_preconditioner(sym2_eigen(j))
        return pre.p, pre.lambda_inv[:, None] * pre.p_inv
    return eye, np.linalg.inv(j)


def _check_step(dtau: float) -> None:
    if not 0.0 < dtau < 1.0:
        raise InvalidConfigError(f"dtau must lie in (0, 1), got {dtau}")


def w_spectrum_check(j: ArrayLike, preconditioner, dtau: float) -> SpectrumCheck:
    """Assemble W for the chosen preconditioner and compare its spectrum with ``1 - dtau``.

    Args:
        j: a nonsingular N x N Jacobian.
        preconditioner: ``Preconditioner`` member or its value.
        dtau: pseudo-time step in (0, 1).

    Raises:
        SingularDecompositionError: the UDL factorization of ``j`` fails.
        UnsupportedMethodError: EIGEN requested for a non-symmetric or non-2x2 Jacobian.
    """
    _check_step(dtau)
    kind = Preconditioner(preconditioner)
    j = np.atleast_2d(np.asarray(j, dtype=np.float64))
    x, y = _preconditioner_blocks(j, kind)
    w = assemble_w_matrix(j, x, y, dtau)

    expected = 1.0 - dtau
    eigenvalues = np.linalg.eigvals(w)
    shifted = w - expected * np.eye(w.shape[0])
    check = SpectrumCheck(
        eigenvalues=eigenvalues,
        expected=expected,
        max_deviation=float(np.max(np.abs(eigenvalues - expected))),
        nilpotency_residual=float(np.linalg.norm(shifted @ shifted, ord=np.inf) / dtau**2),
    )
    logger.debug(
        f"W spectrum ({kind.value}, dtau={dtau}): deviation {check.max_deviation:.3e}, "
        f"nilpotency residual {check.nilpotency_residual:.3e}"
    )
    return check


def relaxation_spectrum_check(j: ArrayLike, dtau: float) -> SpectrumCheck:
    """Spectrum of the first-order error map ``I - dtau M J`` with ``M = J^-1``.

    Every eigenvalue equals ``1 - dtau``, which is the linear convergence rate of DN.
    """
    _check_step(dtau)
    j = np.atleast_2d(np.asarray(j, dtype=np.float64))
    n = j.shape[-1]
    mj = udl_solve(udl_decompose(j), j.T).T
    error_map = np.eye(n) - dtau * mj
    expected = 1.0 - dtau
    eigenvalues = np.linalg.eigvals(error_map).astype(np.complex128)
    return SpectrumCheck(
        eigenvalues=eigenvalues,
        expected=expected,
        max_deviation=float(np.max(np.abs(eigenvalues - expected))),
        nilpotency_residual=float(
            np.linalg.norm(error_map - expected * np.eye(n), ord=np.inf) / dtau
        ),
    )


@dataclass(frozen=True)
class EigenRecord:
    """Eigen-structure of the Jacobian at one iterate."""

    iteration: int
    lambda_plus: float
    lambda_minus: float
    ratio: float
    c_plus: float
    c_minus: float


@dataclass(frozen=True)
class EigenTrace:
    """Eigen-pairs and residual projections along a solver run."""

    records: Tuple[EigenRecord, ...]
    result: SolverResult = field(repr=False)
    reconstruction_error: float

    @property
    def ratios(self) -> Vector:
        """``|lambda- / lambda+|`` per iterate."""
        return np.array([record.ratio for record in self.records])

    @property
    def reconstruction_ok(self) -> bool:
        """Whether ``F = c+ v+ + c- v-`` held at every finite iterate."""
        return self.reconstruction_error < RECONSTRUCTION_TOL


def eigen_trace(problem: Problem, config: SolverConfig, x0: ArrayLike) -> EigenTrace:
    """Run the solver and record the Jacobian's eigen-pairs at every iterate.

    The reconstruction error is the largest ``|F - c+ v+ - c- v-|`` over finite iterates,
    relative to ``max(1, |F|)``.

    Raises:
        UnsupportedMethodError: the problem is not 2-D with a symmetric Jacobian.
    """
    if problem.dim != 2 or not problem.symmetric_jacobian:
        raise UnsupportedMethodError(
            "eigen-trace", problem.name, "needs dim = 2 and a symmetric Jacobian"
        )
    result = run(problem, config, x0)
    positions = result.positions

    with np.errstate(all="ignore"):
        f_values = problem.residual(positions)
        eigen = sym2_eigen(problem.jacobian(positions)).with_coefficients(f_values)
        ratio = eigen.ratio
        rebuilt = (
            eigen.c_plus[:, None] * eigen.v_plus + eigen.c_minus[:, None] * eigen.v_minus
        )
        scale = np.maximum(1.0, np.max(np.abs(f_values), axis=-1))
        errors = np.max(np.abs(f_values - rebuilt), axis=-1) / scale

    finite = np.isfinite(errors)
    reconstruction_error = float(np.max(errors[finite])) if np.any(finite) else 0.0
    ratio = np.where(np.isnan(ratio), np.inf, ratio)
    records = tuple(
        EigenRecord(
            iteration=record.iteration,
            lambda_plus=float(eigen.lambda_plus[k]),
            lambda_minus=float(eigen.lambda_minus[k]),
            ratio=float(ratio[k]),
            c_plus=float(eigen.c_plus[k]),
            c_minus=float(eigen.c_minus[k]),
        )
        for k, record in enumerate(result.trace)
    )
    logger.info(
        f"Eigen trace of {problem.name} ({config.method.value}): {len(records)} records, "
        f"final ratio {records[-1].ratio:.3e}"
    )
    return EigenTrace(records=records, result=result, reconstruction_error=reconstruction_error)


@dataclass(frozen=True)
class SeriesCheck:
    """Deviations of fproblem0's eigen-pairs from their small-x expansions.

    Each deviation tuple holds one entry per checked x. Eigenvalue bounds are
    ``50 |x|^3``; the coefficient expansions stop at first order, so theirs are ``50 x^2``.
    """

    y: float
    xs: Tuple[float, ...]
    lambda_plus: Tuple[float, ...]
    lambda_minus: Tuple[float, ...]
    c_plus: Tuple[float, ...]
    c_minus: Tuple[float, ...]

    def max_deviations(self) -> Tuple[float, float, float, float]:
        """Largest deviation for ``(lambda+, lambda-, |c+|, |c-|)``."""
        return tuple(
            max(values)
            for values in (self.lambda_plus, self.lambda_minus, self.c_plus, self.c_minus)
        )

    @property
    def passed(self) -> bool:
        """Whether every deviation is within its bound."""
        for k, x in enumerate(self.xs):
            eig_bound = SERIES_C * abs(x) ** 3
            coeff_bound = SERIES_C * x * x
            if self.lambda_plus[k] > eig_bound or self.lambda_minus[k] > eig_bound:
                return False
            if self.c_plus[k] > coeff_bound or self.c_minus[k] > coeff_bound:
                return False
        return True


def degeneracy_series_check(y_fixed: float, xs: Sequence[float]) -> SeriesCheck:
    """Compare fproblem0's eigen-pairs near ``x = 0`` with their expansions.

    ``lambda+ = y^2 + 2x + 4x^2``, ``lambda- = -3x^2``, ``|c+| = 4 + (2/y - y^2) x`` and
    ``|c-| = 1 - 8x/y``. Coefficients are compared in magnitude since their signs follow
    the eigenvector sign convention.

    Raises:
        InvalidConfigError: ``y_fixed`` is zero or no x is given.
    """
    if y_fixed == 0.0:
        raise InvalidConfigError("The expansions need y != 0")
    xs = np.asarray(list(xs), dtype=np.float64)
    if xs.size == 0:
        raise InvalidConfigError("No x values to check")
    if np.any(np.abs(xs) > 1e-2):
        logger.warning(f"Series checked outside |x| <= 0.01: {xs.tolist()}")

    y = float(y_fixed)
    problem = builtin("fproblem0")
    points = np.stack([xs, np.full_like(xs, y)], axis=-1)
    eigen = sym2_eigen(problem.jacobian(points)).with_coefficients(problem.residual(points))

    lambda_plus = y * y + 2.0 * xs + 4.0 * xs * xs
    lambda_minus = -3.0 * xs * xs
    c_plus = 4.0 + (2.0 / y - y * y) * xs
    c_minus = 1.0 - 8.0 * xs / y
    return SeriesCheck(
        y=y,
        xs=tuple(xs.tolist()),
        lambda_plus=tuple(np.abs(eigen.lambda_plus - lambda_plus).tolist()),
        lambda_minus=tuple(np.abs(eigen.lambda_minus - lambda_minus).tolist()),
        c_plus=tuple(np.abs(np.abs(eigen.c_plus) - c_plus).tolist()),
        c_minus=tuple(np.abs(np.abs(eigen.c_minus) - c_minus).tolist()),
    )


def linear_error_recurrence(
    dtau: float, steps: int, e_x0: float = 1.0
) -> Tuple[Vector, Vector]:
    """Iterate the linearised scalar W4 error map from ``(e_x0, 0)``.

    ``e_x' = e_x - dtau e_p`` and ``e_p' = (1 - 2 dtau) e_p + dtau e_x``.

    Returns:
        ``(e_x, e_p)`` for ``n = 0..steps``.
    """
    _check_step(dtau)
    e_x = np.zeros(steps + 1)
    e_p = np.zeros(steps + 1)
    e_x[0] = e_x0
    for n in range(steps):
        e_x[n + 1] = e_x[n] - dtau * e_p[n]
        e_p[n + 1] = (1.0 - 2.0 * dtau) * e_p[n] + dtau * e_x[n]
    return e_x, e_p


def linear_error_closed_form(
    dtau: float, steps: int, e_x0: float = 1.0
) -> Tuple[Vector, Vector]:
    """Closed form of ``linear_error_recurrence``.

    ``e_x(n) = e_x0 (1 - dtau)^(n-1) (1 + (n-1) dtau)`` and
    ``e_p(n) = n e_x0 dtau (1 - dtau)^(n-1)``.
    """
    _check_step(dtau)
    n = np.arange(steps + 1, dtype=np.float64)
    decay = (1.0 - dtau) ** (n - 1.0)
    return e_x0 * decay * (1.0 + (n - 1.0) * dtau), n * e_x0 * dtau * decay


@dataclass(frozen=True)
class RecurrenceCheck:
    """Agreement between the error recurrence and its closed form."""

    dtau: float
    steps: int
    max_deviation: float

    @property
    def passed(self) -> bool:
        """Whether the two agree to 1e-12."""
        return self.max_deviation < RECURRENCE_TOL


def error_recurrence_check(dtau: float, steps: int = RECURRENCE_STEPS) -> RecurrenceCheck:
    """Compare the iterated error recurrence with its closed form for ``n <= steps``."""
    iterated = np.stack(linear_error_recurrence(dtau, steps))
    closed = np.stack(linear_error_closed_form(dtau, steps))
    return RecurrenceCheck(
        dtau=dtau, steps=steps, max_deviation=float(np.max(np.abs(iterated - closed)))
    )


def residual_ratios(result: SolverResult) -> Tuple[Vector, Vector]:
    """Per-step residual ratios ``r(n+1) / r(n)`` and quadratic quotients ``r(n+1) / r(n)^2``."""
    residuals = result.residuals
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = residuals[1:] / residuals[:-1]
        quadratic = residuals[1:] / residuals[:-1] ** 2
    return ratios, quadratic


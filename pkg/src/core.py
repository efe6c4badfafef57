#!/usr/bin/env python3
# Copyright 2022 Canonical Ltd.
# See LICENSE file for licensing details.

"""Shared value types and the solver outcome model.

Vectors and matrices are plain float64 numpy arrays. Single values have shape ``(N,)`` and
``(N, N)``; batched code stacks them over leading axes, so ``(..., N)`` and ``(..., N, N)``.
Arrays stored inside the value types below are frozen (not writeable).
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from exceptions import InvalidConfigError
from literals import DAMPING_C, DEFAULT_DTAU, DEFAULT_TOL, NR_DTAU, SOLVE_MAX_ITER

logger = logging.getLogger(__name__)

Vector = NDArray[np.float64]
Matrix = NDArray[np.float64]


def frozen_array(values: ArrayLike) -> NDArray[np.float64]:
    """Return a read-only float64 copy of ``values``."""
    array = np.array(values, dtype=np.float64)
    array.setflags(write=False)
    return array


class MethodKind(str, Enum):
    """Iteration maps, valued by their CLI identifiers."""

    NR = "nr"
    DN = "dn"
    W4_UDL = "w4-udl"
    W4_EIGEN = "w4-eigen"
    DN_EIGEN = "dn-eigen"

    @property
    def second_order(self) -> bool:
        """Whether the map carries a momentum vector."""
        return self in (MethodKind.W4_UDL, MethodKind.W4_EIGEN)

    @property
    def eigen(self) -> bool:
        """Whether the map is preconditioned by the eigen-decomposition of J."""
        return self in (MethodKind.W4_EIGEN, MethodKind.DN_EIGEN)

    @classmethod
    def parse(cls, name: str) -> "MethodKind":
        """Resolve a CLI identifier; ``w4`` is accepted as shorthand for ``w4-udl``."""
        name = name.strip().lower()
        if name == "w4":
            return cls.W4_UDL
        try:
            return cls(name)
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise InvalidConfigError(f"Unknown method '{name}', valid methods are: {valid}")


class Status(str, Enum):
    """Outcome of a solver run."""

    CONVERGED = "Converged"
    MAX_ITER_EXCEEDED = "MaxIterExceeded"
    DIVERGED = "Diverged"
    SINGULAR_DECOMPOSITION = "SingularDecomposition"


@dataclass(frozen=True)
class SolverState:
    """Position ``x`` and momentum ``p`` at one iteration.

    ``p`` is empty for the first-order maps (NR, DN, DN-eigen).
    """

    x: Vector
    p: Vector

    def __post_init__(self):
        object.__setattr__(self, "x", frozen_array(self.x))
        object.__setattr__(self, "p", frozen_array(self.p))
        if self.p.size not in (0, self.x.size):
            raise InvalidConfigError(
                f"Momentum has length {self.p.size}, expected 0 or {self.x.size}"
            )

    @classmethod
    def initial(cls, x0: ArrayLike, second_order: bool) -> "SolverState":
        """Build the starting state; the momentum always starts at zero."""
        x = np.array(x0, dtype=np.float64).reshape(-1)
        p = np.zeros_like(x) if second_order else np.zeros(0)
        return cls(x, p)

    @property
    def finite(self) -> bool:
        """Whether every entry of ``x`` and ``p`` is finite."""
        return bool(np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.p)))


@dataclass(frozen=True)
class SolverConfig:
    """Settings of one solver run.

    Attributes:
        method: which iteration map to apply.
        dtau: pseudo-time step; exactly 1 for NR, strictly inside (0, 1) otherwise.
        damping_c: damping constant of the momentum equation, always 2.
        tol: infinity-norm residual threshold.
        max_iter: cap on the number of map applications.
    """

    method: MethodKind
    dtau: float
    damping_c: float = DAMPING_C
    tol: float = DEFAULT_TOL
    max_iter: int = SOLVE_MAX_ITER

    def __post_init__(self):
        object.__setattr__(self, "method", MethodKind(self.method))
        if self.method is MethodKind.NR:
            if self.dtau != NR_DTAU:
                raise InvalidConfigError(f"NR requires dtau = 1, got {self.dtau}")
        elif not 0.0 < self.dtau < 1.0:
            raise InvalidConfigError(
                f"{self.method.value} requires 0 < dtau < 1, got {self.dtau}"
            )
        if self.damping_c != DAMPING_C:
            raise InvalidConfigError(f"damping_c is fixed at {DAMPING_C}, got {self.damping_c}")
        if not self.tol > 0.0:
            raise InvalidConfigError(f"tol must be positive, got {self.tol}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise InvalidConfigError(f"max_iter must be a positive integer, got {self.max_iter}")

    @classmethod
    def for_method(
        cls,
        method,
        dtau: Optional[float] = None,
        tol: float = DEFAULT_TOL,
        max_iter: int = SOLVE_MAX_ITER,
    ) -> "SolverConfig":
        """Build a config, picking the documented default step for ``method``."""
        method = method if isinstance(method, MethodKind) else MethodKind.parse(method)
        if dtau is None:
            dtau = NR_DTAU if method is MethodKind.NR else DEFAULT_DTAU
        return cls(method=method, dtau=dtau, tol=tol, max_iter=max_iter)


@dataclass(frozen=True)
class TraceRecord:
    """One row of a solver trace."""

    iteration: int
    x: Vector
    p: Vector
    residual: float

    def __post_init__(self):
        object.__setattr__(self, "x", frozen_array(self.x))
        object.__setattr__(self, "p", frozen_array(self.p))


@dataclass(frozen=True)
class SolverResult:
    """Outcome of a run together with its full trace (initial state included)."""

    status: Status
    final_state: SolverState
    iterations: int
    trace: Tuple[TraceRecord, ...] = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "trace", tuple(self.trace))
        if self.iterations != len(self.trace) - 1:
            raise InvalidConfigError(
                f"iterations ({self.iterations}) must equal trace length minus one "
                f"({len(self.trace) - 1})"
            )

    @property
    def converged(self) -> bool:
        """Whether the run reached the residual tolerance."""
        return self.status is Status.CONVERGED

    @property
    def final_residual(self) -> float:
        """Infinity norm of the residual at the final state."""
        return self.trace[-1].residual

    @property
    def residuals(self) -> Vector:
        """Residual norms along the trace."""
        return np.array([record.residual for record in self.trace])

    @property
    def positions(self) -> Matrix:
        """Positions along the trace, one row per iteration."""
        return np.array([record.x for record in self.trace])


def residual_inf_norm(f_value: ArrayLike) -> float:
    """Return the infinity norm of a residual vector.

    Any non-finite entry yields positive infinity so callers can flag divergence.
    """
    f_value = np.asarray(f_value, dtype=np.float64)
    if f_value.size == 0:
        return 0.0
    if not np.all(np.isfinite(f_value)):
        return float("inf")
    return float(np.max(np.abs(f_value)))


def batch_inf_norm(f_values: NDArray[np.float64]) -> NDArray[np.float64]:
    """Row-wise infinity norm over the last axis, with the same non-finite rule."""
    with np.errstate(invalid="ignore"):
        norms = np.max(np.abs(f_values), axis=-1)
    return np.where(np.all(np.isfinite(f_values), axis=-1), norms, np.inf)


def status_of(
    states_finite: bool, residual: float, tol: float, singular: bool, exhausted: bool
) -> Optional[Status]:
    """Decide the terminal status after one check, or None to keep iterating.

    The order is fixed: a singular factorization ends the run before the state moves,
    then non-finite values, then the residual test, then the iteration cap.
    """
    if singular:
        return Status.SINGULAR_DECOMPOSITION
    if not states_finite or not np.isfinite(residual):
        return Status.DIVERGED
    if residual < tol:
        return Status.CONVERGED
    if exhausted:
        return Status.MAX_ITER_EXCEEDED
    return None


def parse_vector(text: str, dim: Optional[int] = None) -> Vector:
    """Parse a comma-separated list of decimals into a vector."""
    try:
        values = [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise InvalidConfigError(f"Cannot parse '{text}' as comma-separated numbers")
    if not values:
        raise InvalidConfigError("Empty vector")
    if dim is not None and len(values) != dim:
        raise InvalidConfigError(f"Expected {dim} components, got {len(values)} in '{text}'")
    return np.array(values, dtype=np.float64)

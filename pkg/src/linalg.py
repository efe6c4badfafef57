#!/usr/bin/env python3
# Copyright 2022 Canonical Ltd.
# See LICENSE file for licensing details.

"""Dense factorizations and solves for the preconditioners.

All routines accept stacks of matrices and vectors over leading axes, so a basin scan
factors every cell's Jacobian in one call. Sums are accumulated in a fixed order with
explicit loops over the (small) dimension, which keeps results for a given cell bitwise
identical whether it is processed alone or inside a batch.
"""

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from core import Matrix, Vector
from exceptions import SingularDecompositionError
from literals import EIGEN_PINV_RTOL, PIVOT_TOL

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class UdlFactors:
    """Factors of ``A = U @ diag(D) @ L``.

    Attributes:
        u: unit upper triangular, shape ``(..., N, N)``.
        d: diagonal of D, shape ``(..., N)``.
        l: unit lower triangular, shape ``(..., N, N)``.
    """

    u: Matrix
    d: Vector
    l: Matrix  # noqa: E741

    @property
    def singular(self) -> NDArray[np.bool_]:
        """Per-matrix flag, True where some pivot magnitude is below the threshold."""
        return np.any(np.abs(self.d) < PIVOT_TOL, axis=-1)

    def reconstruct(self) -> Matrix:
        """Multiply the factors back together."""
        return self.u @ (self.d[..., :, None] * self.l)


def _raise_on_singular(d: Vector) -> None:
    small = np.abs(d) < PIVOT_TOL
    if np.any(small):
        # elimination runs bottom-up, so the last flagged pivot is the one that failed
        position = tuple(np.argwhere(small)[-1])
        raise SingularDecompositionError(int(position[-1]) + 1, float(d[position]))


def udl_decompose(a: ArrayLike, strict: bool = True) -> UdlFactors:
    """Factor ``A = U diag(D) L`` by elimination from the bottom-right corner.

    The last pivot is ``A[N-1, N-1]``; each step eliminates the trailing row and column
    and moves one position up. No pivoting is done, so the factorization exists exactly
    when every trailing principal minor is nonsingular.

    Args:
        a: matrix or stack of matrices, shape ``(..., N, N)``.
        strict: raise on a vanishing pivot. Batched callers pass False and read
            ``UdlFactors.singular`` instead.

    Returns:
        The factors, with the same leading shape as ``a``.

    Raises:
        SingularDecompositionError: a pivot magnitude fell below 1e-300 and strict is set.
    """
    work = np.array(a, dtype=np.float64)
    n = work.shape[-1]
    if work.shape[-2] != n:
        raise ValueError(f"UDL needs square matrices, got shape {work.shape}")

    u = np.zeros_like(work)
    l = np.zeros_like(work)  # noqa: E741
    idx = np.arange(n)
    u[..., idx, idx] = 1.0
    l[..., idx, idx] = 1.0
    d = np.zeros(work.shape[:-1])

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for k in range(n - 1, -1, -1):
            pivot = work[..., k, k].copy()
            d[..., k] = pivot
            if k == 0:
                break
            u[..., :k, k] = work[..., :k, k] / pivot[..., None]
            l[..., k, :k] = work[..., k, :k] / pivot[..., None]
            work[..., :k, :k] -= (u[..., :k, k] * pivot[..., None])[..., :, None] * l[
                ..., k, None, :k
            ]

    if strict:
        _raise_on_singular(d)
    return UdlFactors(u=u, d=d, l=l)


def solve_unit_lower(l: ArrayLike, b: ArrayLike) -> Vector:  # noqa: E741
    """Solve ``L x = b`` by forward substitution; L must have a unit diagonal."""
    l = np.asarray(l, dtype=np.float64)  # noqa: E741
    b = np.asarray(b, dtype=np.float64)
    if l.shape[-1] != b.shape[-1]:
        raise ValueError(f"Shape mismatch: L {l.shape}, b {b.shape}")
    x = np.array(np.broadcast_to(b, np.broadcast_shapes(b.shape, l.shape[:-1])))
    n = x.shape[-1]
    with np.errstate(invalid="ignore", over="ignore"):
        for i in range(1, n):
            acc = x[..., i].copy()
            for j in range(i):
                acc = acc - l[..., i, j] * x[..., j]
            x[..., i] = acc
    return x


def solve_upper_diag(u: ArrayLike, d: ArrayLike, b: ArrayLike, strict: bool = True) -> Vector:
    """Return ``diag(D)^-1 U^-1 b`` by backward substitution, then scaling.

    Raises:
        SingularDecompositionError: some ``|D_k|`` is below 1e-300 and strict is set.
    """
    u = np.asarray(u, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if u.shape[-1] != b.shape[-1] or d.shape[-1] != b.shape[-1]:
        raise ValueError(f"Shape mismatch: U {u.shape}, D {d.shape}, b {b.shape}")
    if strict:
        _raise_on_singular(d)
    y = np.array(np.broadcast_to(b, np.broadcast_shapes(b.shape, u.shape[:-1], d.shape)))
    n = y.shape[-1]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for i in range(n - 2, -1, -1):
            acc = y[..., i].copy()
            for j in range(i + 1, n):
                acc = acc - u[..., i, j] * y[..., j]
            y[..., i] = acc
        return y / d


def udl_solve(factors: UdlFactors, b: ArrayLike) -> Vector:
    """Return ``A^-1 b = L^-1 D^-1 U^-1 b`` without forming an inverse."""
    w = solve_upper_diag(factors.u, factors.d, b, strict=False)
    return solve_unit_lower(factors.l, w)


def matvec(m: ArrayLike, v: ArrayLike) -> Vector:
    """Matrix-vector product over stacks, summed in a fixed order."""
    m = np.asarray(m, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    n = m.shape[-1]
    out = np.zeros(np.broadcast_shapes(m.shape[:-1], v.shape[:-1] + (m.shape[-2],)))
    with np.errstate(invalid="ignore", over="ignore"):
        for i in range(m.shape[-2]):
            acc = m[..., i, 0] * v[..., 0]
            for j in range(1, n):
                acc = acc + m[..., i, j] * v[..., j]
            out[..., i] = acc
    return out


@dataclass(frozen=True)
class Eigen2:
    """Eigen-pairs of a symmetric 2x2 matrix (or a stack of them).

    ``c_plus`` and ``c_minus`` hold the projections of a residual onto the eigenvectors and
    are only present after ``with_coefficients``.
    """

    lambda_plus: NDArray[np.float64]
    lambda_minus: NDArray[np.float64]
    v_plus: Vector
    v_minus: Vector
    c_plus: Optional[NDArray[np.float64]] = None
    c_minus: Optional[NDArray[np.float64]] = None

    def with_coefficients(self, f_value: ArrayLike) -> "Eigen2":
        """Return a copy carrying ``c = v^T F`` for both eigenvectors."""
        f_value = np.asarray(f_value, dtype=np.float64)
        c_plus = self.v_plus[..., 0] * f_value[..., 0] + self.v_plus[..., 1] * f_value[..., 1]
        c_minus = (
            self.v_minus[..., 0] * f_value[..., 0] + self.v_minus[..., 1] * f_value[..., 1]
        )
        return replace(self, c_plus=c_plus, c_minus=c_minus)

    @property
    def ratio(self) -> NDArray[np.float64]:
        """``|lambda_minus / lambda_plus|``, +inf where lambda_plus vanishes."""
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.abs(self.lambda_minus / self.lambda_plus)
        return np.where(self.lambda_plus == 0.0, np.inf, ratio)

    @property
    def q(self) -> Matrix:
        """The matrix ``[v+ v-]`` with the eigenvectors as columns."""
        return np.stack([self.v_plus, self.v_minus], axis=-1)


def sym2_eigen(a: ArrayLike) -> Eigen2:
    """Closed-form eigen-pairs of symmetric 2x2 matrices ``[[a11, b], [b, a22]]``.

    The eigenvalues are ``(tr +- sqrt(tr^2 - 4 det)) / 2``; the root of larger magnitude is
    taken directly and the other one as ``det`` divided by it, which keeps a nearly zero
    eigenvalue accurate.

    Each eigenvector keeps the orientation of ``[b, lambda - a11]`` divided by its norm:
    ``v+ = [b, t] / a`` with ``t = lambda+ - a11 >= 0``, ``a = hypot(b, t)``, and
    ``v- = sign(b) [t, -b] / a``. The first row of ``P = Q / det(Q)`` is then ``-[|b|, t] / a``
    whatever the sign of b, so P does not flip between neighbouring iterates. A zero
    off-diagonal entry is the ``b -> 0+`` limit: ``v+ = e2, v- = e1`` when ``a22 > a11``,
    otherwise ``v+ = e1, v- = -e2``.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.shape[-2:] != (2, 2):
        raise ValueError(f"sym2_eigen needs 2x2 matrices, got shape {a.shape}")
    a11, b, a22 = a[..., 0, 0], a[..., 0, 1], a[..., 1, 1]

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        trace = a11 + a22
        det = a11 * a22 - b * b
        disc = np.hypot(a11 - a22, 2.0 * b)
        big = 0.5 * (trace + np.copysign(disc, trace))
        small = np.where(big != 0.0, det / big, 0.0)
        lambda_plus = np.maximum(big, small)
        lambda_minus = np.minimum(big, small)

        # lambda+ - a11 without cancellation
        gap = a22 - a11
        t = np.where(gap >= 0.0, 0.5 * (gap + disc), 2.0 * b * b / (disc - gap))
        norm = np.hypot(b, t)
        v_plus = np.stack([b, t], axis=-1) / norm[..., None]
        sign = np.where(b < 0.0, -1.0, 1.0)[..., None]
        v_minus = sign * np.stack([v_plus[..., 1], -v_plus[..., 0]], axis=-1)

    diagonal = (b == 0.0)[..., None]
    second_larger = (a22 > a11)[..., None]
    e1 = np.broadcast_to(np.array([1.0, 0.0]), v_plus.shape)
    e2 = np.broadcast_to(np.array([0.0, 1.0]), v_plus.shape)
    v_plus = np.where(diagonal, np.where(second_larger, e2, e1), v_plus)
    v_minus = np.where(diagonal, np.where(second_larger, e1, -e2), v_minus)
    lambda_plus = np.where(diagonal[..., 0], np.maximum(a11, a22), lambda_plus)
    lambda_minus = np.where(diagonal[..., 0], np.minimum(a11, a22), lambda_minus)
    return Eigen2(
        lambda_plus=lambda_plus,
        lambda_minus=lambda_minus,
        v_plus=v_plus,
        v_minus=v_minus,
    )


@dataclass(frozen=True)
class EigenPreconditioner:
    """``P = Q / det(Q)``, its inverse and the pseudo-inverse of ``Lambda``."""

    p: Matrix
    p_inv: Matrix
    lambda_inv: Vector


def eigen_preconditioner(eigen: Eigen2) -> EigenPreconditioner:
    """Build the preconditioner matrices of the eigen-based maps.

    Eigenvalues with magnitude below ``1e-14 * max(1, |lambda+|, |lambda-|)`` get a zero
    entry in ``Lambda^-1``.
    """
    q = eigen.q
    det_q = q[..., 0, 0] * q[..., 1, 1] - q[..., 0, 1] * q[..., 1, 0]
    p = q / det_q[..., None, None]
    # adj(P) / det(P), and det(P) = 1 / det(Q)
    adjugate = np.stack(
        [
            np.stack([p[..., 1, 1], -p[..., 0, 1]], axis=-1),
            np.stack([-p[..., 1, 0], p[..., 0, 0]], axis=-1),
        ],
        axis=-2,
    )
    p_inv = adjugate * det_q[..., None, None]

    lambdas = np.stack([eigen.lambda_plus, eigen.lambda_minus], axis=-1)
    scale = np.maximum(1.0, np.max(np.abs(lambdas), axis=-1))
    keep = np.abs(lambdas) >= EIGEN_PINV_RTOL * scale[..., None]
    if not np.all(keep):
        logger.debug(f"Pseudo-inverting {int(np.sum(~keep))} vanishing eigenvalue(s)")
    with np.errstate(divide="ignore"):
        lambda_inv = np.where(keep, 1.0 / np.where(keep, lambdas, 1.0), 0.0)
    return EigenPreconditioner(p=p, p_inv=p_inv, lambda_inv=lambda_inv)


def assemble_w_matrix(j: ArrayLike, x: ArrayLike, y: ArrayLike, dtau: float) -> Matrix:
    """Assemble the 2N x 2N error-propagation matrix of the W4 map.

    ``W = [[I, -dtau X], [dtau Y J, (1 - 2 dtau) I]]``.
    """
    j = np.atleast_2d(np.asarray(j, dtype=np.float64))
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    n = j.shape[-1]
    for name, block in (("J", j), ("X", x), ("Y", y)):
        if block.shape != (n, n):
            raise ValueError(f"Block {name} has shape {block.shape}, expected {(n, n)}")
    eye = np.eye(n)
    return np.block([[eye, -dtau * x], [dtau * (y @ j), (1.0 - 2.0 * dtau) * eye]])

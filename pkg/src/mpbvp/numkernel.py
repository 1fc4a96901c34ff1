"""Small dense linear algebra: LU solve with determinant, rcond, eigenvalues.

Matrices are plain 2-D float ndarrays.  Factorization uses LAPACK's
partially pivoted LU (``getrf``); singularity detection, the determinant
and its pivot sign are handled here so that callers get one consistent
notion of "singular to working precision".
"""

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .errors import DimensionMismatch, NumericalFailure, SingularMatrix

#: Pivots smaller than this in magnitude are treated as exact zeros.
PIVOT_FLOOR = 1e-300
#: rcond below this flags a matrix as singular where solvability matters.
RCOND_SINGULAR = 1e-14


def as_matrix(M, name="matrix"):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NumericalFailure(f"{name} has non-finite entries")
    return M


def _square(M, name="matrix"):
    M = as_matrix(M, name)
    if M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {M.shape}")
    return M


def lu_factor(M):
    """Return ``(lu, piv, det)``; raise SingularMatrix on a vanishing pivot."""
    M = _square(M)
    lu, piv = lapack.dgetrf(M)[:2]
    diag = np.diag(lu)
    if diag.size and np.min(np.abs(diag)) < PIVOT_FLOOR:
        raise SingularMatrix("zero pivot after partial pivoting")
    swaps = np.count_nonzero(piv != np.arange(piv.size))
    with np.errstate(over="ignore", under="ignore"):
        det = float(np.prod(diag)) * (-1.0 if swaps % 2 else 1.0)
    return lu, piv, det


def lu_solve(M, B):
    """Solve ``M X = B``.

    Returns ``(X, det)``.  ``B`` may be a vector or an ``n x k`` matrix;
    ``X`` has the same shape as ``B``.

    >>> X, det = lu_solve([[2.0, 0.0], [0.0, 3.0]], [[2.0], [3.0]])
    >>> X.ravel().tolist(), det
    ([1.0, 1.0], 6.0)
    """
    lu, piv, det = lu_factor(M)
    B = np.asarray(B, dtype=float)
    if B.shape[0] != lu.shape[0]:
        raise DimensionMismatch(f"right-hand side has {B.shape[0]} rows, expected {lu.shape[0]}")
    X = scipy.linalg.lu_solve((lu, piv), B, check_finite=False)
    return X, det


def solve(M, b):
    """Solve ``M x = b`` without the determinant; cheap enough for per-stage use."""
    M = np.asarray(M, dtype=float)
    b = np.asarray(b, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or b.shape[0] != M.shape[0]:
        raise DimensionMismatch(f"cannot solve {M.shape} system with right-hand side {b.shape}")
    lu, _, x, _ = lapack.dgesv(M, b)
    if M.size and np.min(np.abs(lu.diagonal())) < PIVOT_FLOOR:
        raise SingularMatrix("zero pivot after partial pivoting")
    return x


def det(M):
    try:
        return lu_factor(M)[2]
    except SingularMatrix:
        return 0.0


def rcond_estimate(M):
    """Estimate the reciprocal 1-norm condition number of ``M``.

    Exactly singular matrices give 0; the identity gives 1.
    """
    M = _square(M)
    if M.size == 0:
        return 1.0
    anorm = np.linalg.norm(M, 1)
    if anorm == 0.0:
        return 0.0
    try:
        lu, _, _ = lu_factor(M)
    except SingularMatrix:
        return 0.0
    rc, info = lapack.dgecon(lu, anorm, norm="1")
    if info != 0:
        raise NumericalFailure(f"dgecon failed with info={info}")
    return float(min(max(rc, 0.0), 1.0))


def eigenvalues(M):
    """Eigenvalues of a real square matrix as a complex array (unordered).

    Hessenberg reduction followed by shifted QR (LAPACK ``geev`` without
    eigenvectors).
    """
    M = _square(M)
    try:
        w = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigenvalue iteration did not converge: {exc}") from None
    return np.asarray(w, dtype=complex)

"""Dense LU with reuse, and a smallest-singular-pair routine.

LU factors come from LAPACK (``scipy.linalg.lu_factor``, partial pivoting).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

EPS = np.finfo(float).eps


class SingularMatrixError(np.linalg.LinAlgError):
    """A pivot vanished to working precision during factorization."""


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Factorization:
    lu: np.ndarray
    piv: np.ndarray

    @property
    def n(self) -> int:
        return self.lu.shape[0]


def factorize(M) -> Factorization:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise SingularMatrixError("matrix has non-finite entries")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
    pivots = np.abs(np.diagonal(lu))
    scale = np.abs(M).max() if M.size else 0.0
    # a pivot below eps * max|M| carries no significant digits
    bad = np.flatnonzero(pivots <= EPS * scale)
    if scale == 0.0 or bad.size:
        index = int(bad[0]) if bad.size else 0
        raise SingularMatrixError(f"singular to working precision (pivot {index})")
    lu.flags.writeable = False
    return Factorization(lu, piv)


def solve(fact: Factorization, b, trans: bool = False) -> np.ndarray:
    """Solve ``M y = b`` (or ``M^T y = b`` with ``trans``)."""
    return scipy.linalg.lu_solve((fact.lu, fact.piv), b, trans=int(trans), check_finite=False)


def norm_inf(x) -> float:
    return float(np.max(np.abs(x))) if np.size(x) else 0.0


def min_singular_direction(M, tol: float = 1e-10, max_iter: int = 500):
    """Smallest singular value of ``M`` and its right singular vector.

    Inverse power iteration on ``M^T M``, each step applying ``M^{-1} M^{-T}``
    through one LU factorization of ``M``.  An exactly singular ``M`` returns
    ``sigma_min = 0`` with a null vector taken from the LU factors.
    """
    M = np.asarray(M, dtype=float)
    m = M.shape[0]
    try:
        fact = factorize(M)
    except SingularMatrixError:
        return 0.0, _null_vector_from_lu(M)

    x = np.ones(m) / np.sqrt(m)
    lam_old = np.inf
    for _ in range(max_iter):
        y = solve(fact, solve(fact, x, trans=True))
        ny = np.linalg.norm(y)
        if not np.isfinite(ny) or ny == 0.0:
            return 0.0, x
        x = y / ny
        lam = 1.0 / ny  # Rayleigh-style estimate of sigma_min^2
        if abs(lam - lam_old) <= tol * lam:
            break
        lam_old = lam
    else:
        raise ConvergenceError(f"inverse iteration did not converge in {max_iter} steps")
    sigma = float(np.linalg.norm(M @ x))
    if x[np.argmax(np.abs(x))] < 0:
        x = -x
    return sigma, x


def _null_vector_from_lu(M):
    # Back-substitute U y = 0 with the first vanishing pivot set free.
    _, _, U = scipy.linalg.lu(M)
    m = U.shape[0]
    scale = np.abs(U).max() or 1.0
    k = int(np.flatnonzero(np.abs(np.diagonal(U)) <= EPS * scale)[0])
    y = np.zeros(m)
    y[k] = 1.0
    for i in range(k - 1, -1, -1):
        y[i] = -(U[i, i + 1: k + 1] @ y[i + 1: k + 1]) / U[i, i]
    y /= np.linalg.norm(y)
    if y[np.argmax(np.abs(y))] < 0:
        y = -y
    return y

"""
Small dense complex linear algebra shared by the channel, whitening and
receiver code: Cholesky, lower-triangular inversion, the dominant singular
triplet and matrix norms.

All arrays are float64 / complex128. Matrices here are at most a few tens of
rows, so nothing is blocked or sparse.
"""

import logging
from dataclasses import dataclass
from typing import Dict

import numpy as np
from scipy.linalg import solve_triangular

from ici_whitening.errors import (
    DimensionMismatchError,
    NoConvergenceError,
    NotHermitianError,
    NotPositiveDefiniteError,
    SingularDiagonalError,
    ZeroMatrixError,
)

logger = logging.getLogger(__name__)

HERMITIAN_RTOL = 1e-10
PIVOT_RTOL = 1e-14
DIAGONAL_ATOL = 1e-14
POWER_ITERATION_TOL = 1e-12
POWER_ITERATION_MAX = 10_000


@dataclass(frozen=True)
class SingularTriplet:
    sigma: float
    left: np.ndarray
    right: np.ndarray


def as_matrix(a) -> np.ndarray:
    """Coerce to a finite 2-D complex128 array."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise DimensionMismatchError(f"Expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("Matrix has non-finite entries")
    return m


def is_hermitian(a: np.ndarray, rtol: float = HERMITIAN_RTOL) -> bool:
    return bool(np.linalg.norm(a - a.conj().T) <= rtol * np.linalg.norm(a))


def cholesky(a) -> np.ndarray:
    """
    Lower-triangular L with L @ L^H == A.

    Raises NotHermitianError when A is not Hermitian within 1e-10 relative and
    NotPositiveDefiniteError when any pivot (L_jj^2) is non-positive or below
    1e-14 * trace(A) / n.
    """
    m = as_matrix(a)
    n, cols = m.shape
    if n != cols:
        raise DimensionMismatchError(f"Cholesky needs a square matrix, got {m.shape}")
    if not is_hermitian(m):
        raise NotHermitianError("Matrix is not Hermitian")

    try:
        lower = np.linalg.cholesky(0.5 * (m + m.conj().T))
    except np.linalg.LinAlgError as e:
        raise NotPositiveDefiniteError(f"Cholesky factorization failed: {e}") from e

    pivots = np.abs(np.diag(lower)) ** 2
    floor = PIVOT_RTOL * float(np.real(np.trace(m))) / n
    if floor <= 0 or np.any(pivots <= floor):
        raise NotPositiveDefiniteError(
            f"Pivot below threshold (min pivot {pivots.min():.3e}, floor {floor:.3e})"
        )
    return lower


def invert_lower_triangular(lower) -> np.ndarray:
    m = as_matrix(lower)
    n, cols = m.shape
    if n != cols:
        raise DimensionMismatchError(f"Expected a square matrix, got {m.shape}")
    if np.any(np.abs(np.diag(m)) <= DIAGONAL_ATOL):
        raise SingularDiagonalError("Triangular matrix has a vanishing diagonal entry")
    return solve_triangular(m, np.eye(n, dtype=np.complex128), lower=True)


def _gram_power_iteration(gram: np.ndarray) -> tuple:
    """Dominant eigenpair of a Hermitian PSD matrix by power iteration."""
    n = gram.shape[0]
    v = np.ones(n, dtype=np.complex128) / np.sqrt(n)
    previous = None

    for iteration in range(1, POWER_ITERATION_MAX + 1):
        w = gram @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            # start vector orthogonal to the dominant subspace
            column = int(np.argmax(np.linalg.norm(gram, axis=0)))
            w = gram[:, column].copy()
            norm = np.linalg.norm(w)
        v = w / norm
        rayleigh = float(np.real(np.vdot(v, gram @ v)))
        if previous is not None and abs(rayleigh - previous) <= POWER_ITERATION_TOL * max(abs(rayleigh), 1e-300):
            logger.debug(f"Power iteration converged after {iteration} iterations")
            return rayleigh, v
        previous = rayleigh

    raise NoConvergenceError(f"Power iteration did not converge in {POWER_ITERATION_MAX} iterations")


def dominant_singular_triplet(h) -> SingularTriplet:
    m = as_matrix(h)
    if not np.any(m):
        raise ZeroMatrixError("Dominant singular triplet of a zero matrix is undefined")

    eigenvalue, right = _gram_power_iteration(m.conj().T @ m)
    image = m @ right
    sigma = float(np.linalg.norm(image))
    if sigma == 0.0:
        raise ZeroMatrixError("Power iteration collapsed onto the null space")
    # one refinement step keeps sigma accurate to machine precision
    right = m.conj().T @ image
    right = right / np.linalg.norm(right)
    image = m @ right
    sigma = float(np.linalg.norm(image))
    return SingularTriplet(sigma=sigma, left=image / sigma, right=right)


def spectral_norm(a) -> float:
    m = as_matrix(a)
    if not np.any(m):
        return 0.0
    return dominant_singular_triplet(m).sigma


def matrix_norms(a) -> Dict[str, float]:
    m = as_matrix(a)
    return {
        "spectral": spectral_norm(m),
        "frobenius": float(np.linalg.norm(m, "fro")),
    }

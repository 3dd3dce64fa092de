"""
One-class SVM baseline.

Solves the nu-formulation dual

    min_a  0.5 a^T K a   s.t.  0 <= a_i <= 1/(nu n),  sum_i a_i = 1

with two-variable SMO steps and second-order working-set selection. The
decision score rho - sum_i a_i k(x_i, x) is positive outside the learned
region.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ici_whitening.detectors.base_detector import BaseDetector
from ici_whitening.errors import EmptyInputError, NoConvergenceError

logger = logging.getLogger(__name__)

TAU = 1e-12
BOUND_ATOL = 1e-12


@dataclass(frozen=True)
class OcSvmModel:
    support_vectors: np.ndarray
    alphas: np.ndarray
    rho: float
    bandwidth: float
    nu: float


def squared_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    sq = np.sum(a ** 2, axis=1)[:, None] + np.sum(b ** 2, axis=1)[None, :] - 2.0 * a @ b.T
    return np.maximum(sq, 0.0)


def rbf_kernel(a: np.ndarray, b: np.ndarray, bandwidth: float) -> np.ndarray:
    return np.exp(-squared_distances(np.atleast_2d(a), np.atleast_2d(b)) / (2.0 * bandwidth ** 2))


def median_bandwidth(x: np.ndarray) -> float:
    """Bandwidth whose square is the median pairwise squared distance."""
    n = x.shape[0]
    if n < 2:
        return 1.0
    sq = squared_distances(x, x)[np.triu_indices(n, k=1)]
    median = float(np.median(sq))
    return float(np.sqrt(median)) if median > 0 else 1.0


def _select_working_set(alpha: np.ndarray, grad: np.ndarray, q: np.ndarray, cap: float, tol: float):
    up = alpha < cap
    low = alpha > 0
    if not up.any() or not low.any():
        return -1, -1

    neg_grad = -grad
    i = int(np.flatnonzero(up)[np.argmax(neg_grad[up])])
    g_max = neg_grad[i]
    g_min = float(np.min(neg_grad[low]))
    if g_max - g_min < tol:
        return -1, -1

    b = g_max + grad
    candidates = low & (b > 0)
    if not candidates.any():
        return -1, -1
    a = q[i, i] + np.diag(q) - 2.0 * q[i, :]
    a = np.where(a <= 0, TAU, a)
    obj = np.full(alpha.shape, np.inf)
    obj[candidates] = -(b[candidates] ** 2) / a[candidates]
    return i, int(np.argmin(obj))


def ocsvm_train(
    trainset,
    nu: float = 0.1,
    bandwidth: Optional[float] = None,
    tol: float = 1e-6,
    max_iter: int = 100_000,
) -> OcSvmModel:
    x = np.asarray(trainset, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise EmptyInputError("One-class SVM needs a non-empty (N, F) training set")
    if not 0 < nu <= 1:
        raise ValueError("nu must lie in (0, 1]")

    n = x.shape[0]
    bandwidth = bandwidth or median_bandwidth(x)
    q = rbf_kernel(x, x, bandwidth)
    cap = 1.0 / (nu * n)
    alpha = np.full(n, 1.0 / n)
    grad = q @ alpha

    for iteration in range(max_iter):
        i, j = _select_working_set(alpha, grad, q, cap, tol)
        if j == -1:
            break
        a = q[i, i] + q[j, j] - 2.0 * q[i, j]
        if a <= 0:
            a = TAU
        delta = (grad[j] - grad[i]) / a

        old_i, old_j = alpha[i], alpha[j]
        total = old_i + old_j
        alpha[i] = min(max(old_i + delta, 0.0), cap)
        alpha[j] = min(max(total - alpha[i], 0.0), cap)
        alpha[i] = total - alpha[j]

        grad += q[:, i] * (alpha[i] - old_i) + q[:, j] * (alpha[j] - old_j)
    else:
        raise NoConvergenceError(f"SMO did not reach KKT tolerance {tol} in {max_iter} iterations")

    rho = _offset(alpha, grad, cap)
    support = alpha > 0
    logger.debug(f"OC-SVM converged after {iteration} SMO steps: {int(support.sum())} support vectors, rho={rho:.6g}")
    return OcSvmModel(x[support], alpha[support], rho, bandwidth, nu)


def _offset(alpha: np.ndarray, grad: np.ndarray, cap: float) -> float:
    """rho from the free support vectors, else the midpoint of the KKT interval."""
    free = (alpha > BOUND_ATOL) & (alpha < cap - BOUND_ATOL)
    if free.any():
        return float(np.mean(grad[free]))
    at_upper = alpha >= cap - BOUND_ATOL
    at_lower = alpha <= BOUND_ATOL
    lb = float(np.max(grad[at_upper])) if at_upper.any() else -np.inf
    ub = float(np.min(grad[at_lower])) if at_lower.any() else np.inf
    if not np.isfinite(lb):
        return ub
    if not np.isfinite(ub):
        return lb
    return 0.5 * (lb + ub)


def ocsvm_decision(model: OcSvmModel, x: np.ndarray) -> np.ndarray:
    """Weighted kernel sum sum_i a_i k(x_i, x) for one or many vectors."""
    k = rbf_kernel(model.support_vectors, np.atleast_2d(np.asarray(x, dtype=float)), model.bandwidth)
    return model.alphas @ k


def ocsvm_score(model: OcSvmModel, x: np.ndarray) -> float:
    return float(model.rho - ocsvm_decision(model, x)[0])


class OcSvmDetector(BaseDetector):
    """Anomalous when the score is positive."""

    def __init__(self, name: str, nu: float = 0.1, bandwidth: Optional[float] = None,
                 tol: float = 1e-6, max_iter: int = 100_000):
        super().__init__(name, nu=nu, bandwidth=bandwidth, tol=tol, max_iter=max_iter)
        self.model: Optional[OcSvmModel] = None

    def _fit(self, data: np.ndarray) -> None:
        self.model = ocsvm_train(data, **self.config)
        self.threshold = 0.0

    def score(self, x: np.ndarray) -> float:
        return ocsvm_score(self.model, x)

"""k-nearest-neighbour distance baseline."""

import numpy as np

from ici_whitening.detectors.base_detector import BaseDetector, nearest_rank_quantile
from ici_whitening.errors import KOutOfRangeError


def knn_score(trainset, x: np.ndarray, k: int) -> float:
    """Mean Euclidean distance from x to its k nearest training points."""
    data = np.atleast_2d(np.asarray(trainset, dtype=float))
    if not 1 <= k <= data.shape[0]:
        raise KOutOfRangeError(f"k={k} outside [1, {data.shape[0]}]")
    distances = np.linalg.norm(data - np.asarray(x, dtype=float).reshape(1, -1), axis=1)
    return float(np.mean(np.sort(np.partition(distances, k - 1)[:k])))


class KnnDetector(BaseDetector):
    """Threshold is the nearest-rank quantile of leave-one-out training scores."""

    def __init__(self, name: str, k: int, quantile: float = 0.95):
        super().__init__(name, k=k, quantile=quantile)
        self.k = k
        self.quantile = quantile
        self.data = None

    def _fit(self, data: np.ndarray) -> None:
        n = data.shape[0]
        if not 1 <= self.k <= n:
            raise KOutOfRangeError(f"k={self.k} outside [1, {n}]")
        self.data = data
        if n == 1:
            self.threshold = 0.0
            return
        k_loo = min(self.k, n - 1)
        loo = [knn_score(np.delete(data, i, axis=0), data[i], k_loo) for i in range(n)]
        self.threshold = nearest_rank_quantile(loo, self.quantile)

    def score(self, x: np.ndarray) -> float:
        return knn_score(self.data, x, self.k)

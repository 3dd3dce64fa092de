"""
Base Detector

Abstract base class for one-class interference detectors. A detector is fitted
on interference-free feature vectors only and then scores test vectors;
larger scores mean "more likely interfered".
"""

import logging
import math
import time
from abc import ABC, abstractmethod
from typing import Any, Dict, Sequence

import numpy as np

from ici_whitening.errors import EmptyInputError

logger = logging.getLogger(__name__)


def nearest_rank_quantile(values: Sequence[float], q: float) -> float:
    """Smallest value with at least a fraction q of the sample at or below it."""
    ordered = np.sort(np.asarray(values, dtype=float))
    if ordered.size == 0:
        raise EmptyInputError("Quantile of an empty sample")
    rank = max(int(math.ceil(q * ordered.size - 1e-9)), 1)
    return float(ordered[min(rank, ordered.size) - 1])


class BaseDetector(ABC):
    """
    Abstract base class for detectors.

    Subclasses implement _fit and score; fit() wraps _fit with timing and
    logging, is_anomalous() compares a score with the calibrated threshold.
    """

    def __init__(self, name: str, **kwargs):
        self.name = name
        self.config = kwargs
        self.threshold = None
        self.fit_seconds = 0.0

    def fit(self, trainset: Sequence[np.ndarray]) -> "BaseDetector":
        data = np.asarray(trainset, dtype=float)
        if data.ndim != 2 or data.shape[0] == 0:
            raise EmptyInputError(f"{self.name}: training set must be a non-empty 2-D array")
        start = time.perf_counter()
        self._fit(data)
        self.fit_seconds = time.perf_counter() - start
        logger.debug(f"Fitted {self.name} on {data.shape[0]} samples in {self.fit_seconds:.3f}s (threshold={self.threshold:.6g})")
        return self

    @property
    def is_fitted(self) -> bool:
        return self.threshold is not None

    @abstractmethod
    def _fit(self, data: np.ndarray) -> None:
        """Train on an (N, F) array and set self.threshold."""
        pass

    @abstractmethod
    def score(self, x: np.ndarray) -> float:
        """Anomaly score of one raw feature vector."""
        pass

    def score_many(self, xs: Sequence[np.ndarray]) -> np.ndarray:
        return np.array([self.score(x) for x in xs])

    def is_anomalous(self, x: np.ndarray) -> bool:
        if not self.is_fitted:
            raise RuntimeError(f"{self.name} has not been fitted")
        return self.score(x) > self.threshold

    def get_info(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "threshold": self.threshold,
            "fit_seconds": self.fit_seconds,
            "config": dict(self.config),
        }

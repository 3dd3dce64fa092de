"""
Detector inputs: real feature vectors built from complex channel estimates,
and scalar Z-score normalization.
"""

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ici_whitening.errors import ConstantDataError, EmptySampleSetError, InconsistentDimensionsError

STD_FLOOR = 1e-12


@dataclass(frozen=True)
class NormalizationStats:
    mean: float
    std: float

    def __post_init__(self):
        if not self.std > 0:
            raise ConstantDataError(f"Normalization std must be positive, got {self.std}")


def featurize(channel_estimates) -> np.ndarray:
    """
    Flatten per-subcarrier estimates (N_f vectors of length N_r) into a real
    vector: subcarrier-major, antenna-minor, real then imaginary part.
    """
    if isinstance(channel_estimates, np.ndarray) and channel_estimates.ndim == 2:
        h = channel_estimates
    else:
        columns = [np.asarray(c).reshape(-1) for c in channel_estimates]
        if len({c.size for c in columns}) > 1:
            raise InconsistentDimensionsError("Channel estimates disagree in receive-antenna count")
        h = np.array(columns)
    h = h.astype(np.complex128, copy=False)
    return np.stack([h.real, h.imag], axis=-1).reshape(-1)


def defeaturize(features: np.ndarray, n_r: int) -> np.ndarray:
    """Inverse of featurize, returns (N_f, N_r) complex estimates."""
    pairs = np.asarray(features, dtype=float).reshape(-1, n_r, 2)
    return pairs[..., 0] + 1j * pairs[..., 1]


def zscore_fit(dataset: Sequence[np.ndarray]) -> NormalizationStats:
    """Scalar mean and population std pooled over every entry of every vector."""
    pooled = np.concatenate([np.asarray(x, dtype=float).reshape(-1) for x in dataset]) if len(dataset) else np.empty(0)
    if pooled.size == 0:
        raise EmptySampleSetError("Cannot fit normalization on an empty dataset")
    std = float(pooled.std())
    if std < STD_FLOOR:
        raise ConstantDataError(f"Pooled features are constant (std={std:.3e})")
    return NormalizationStats(float(pooled.mean()), std)


def zscore_apply(stats: NormalizationStats, x: np.ndarray) -> np.ndarray:
    return (np.asarray(x, dtype=float) - stats.mean) / stats.std


def zscore_sample(x: np.ndarray) -> np.ndarray:
    """Test-mode normalization: each sample is standardized by its own statistics."""
    return zscore_apply(zscore_fit([x]), x)

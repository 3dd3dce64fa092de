"""
Interference-plus-noise covariance, whitening filters and the
sample-covariance concentration bound.

Complex Gaussian convention used everywhere in this module: n ~ CN(0, s^2 I)
has real and imaginary parts of variance s^2 / 2 each, so E||n||^2 = N_r s^2.
sigma_m^2 in BernsteinParams is that per-entry total variance.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from ici_whitening.config import BernsteinConfig
from ici_whitening.errors import DimensionMismatchError, EmptySampleSetError, InconsistentParamsError
from ici_whitening.numerics import cholesky, invert_lower_triangular, spectral_norm
from ici_whitening.seeding import derive_rng, derive_seed

logger = logging.getLogger(__name__)

PARAMS_RTOL = 1e-12


@dataclass(frozen=True)
class InterferenceNoiseSample:
    u: np.ndarray
    subcarrier: int = 0
    time_index: int = 0


def complex_gaussian(rng: np.random.Generator, shape, variance: float) -> np.ndarray:
    """CN(0, variance) entries."""
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def expected_covariance(g_matrix: np.ndarray, sigma_sq: float) -> np.ndarray:
    """G G^H + sigma^2 I for the stacked neighbour channel G (N_r x M_t N_c)."""
    if sigma_sq <= 0:
        raise ValueError("sigma_sq must be positive")
    g = np.atleast_2d(np.asarray(g_matrix, dtype=np.complex128))
    return g @ g.conj().T + sigma_sq * np.eye(g.shape[0])


def fixed_signal_covariance(g: np.ndarray, sigma_sq: float) -> np.ndarray:
    if sigma_sq <= 0:
        raise ValueError("sigma_sq must be positive")
    v = np.asarray(g, dtype=np.complex128).reshape(-1)
    return np.outer(v, v.conj()) + sigma_sq * np.eye(v.size)


def _as_sample_matrix(samples) -> np.ndarray:
    """Stack samples into a (T, N_r) array."""
    if isinstance(samples, np.ndarray):
        stacked = np.atleast_2d(samples)
    else:
        rows = [s.u if isinstance(s, InterferenceNoiseSample) else s for s in samples]
        if not rows:
            raise EmptySampleSetError("No interference-plus-noise samples")
        lengths = {np.asarray(r).size for r in rows}
        if len(lengths) != 1:
            raise DimensionMismatchError(f"Samples have different lengths: {sorted(lengths)}")
        stacked = np.array([np.asarray(r).reshape(-1) for r in rows])
    if stacked.shape[0] == 0:
        raise EmptySampleSetError("No interference-plus-noise samples")
    return stacked.astype(np.complex128, copy=False)


def sample_covariance(samples) -> np.ndarray:
    """(1/T) sum_t u_t u_t^H, Hermitian by construction."""
    u = _as_sample_matrix(samples)
    r = (u.T @ u.conj()) / u.shape[0]
    return 0.5 * (r + r.conj().T)


def whitening_filter(r: np.ndarray) -> np.ndarray:
    """W = L^-1 with R = L L^H, so that W R W^H = I."""
    return invert_lower_triangular(cholesky(r))


def apply_whitening(w: np.ndarray, y: np.ndarray) -> np.ndarray:
    w = np.asarray(w)
    y = np.asarray(y)
    if w.ndim != 2 or y.shape[0] != w.shape[1]:
        raise DimensionMismatchError(f"Cannot apply {w.shape} filter to {y.shape} signal")
    return w @ y


# ========== Concentration bound ==========

@dataclass(frozen=True)
class BernsteinParams:
    epsilon: float
    t_s: int
    n_r: int
    sigma_m: float
    g: np.ndarray
    c1: float
    sigma_f_sq: float
    l_z: float

    @classmethod
    def build(cls, epsilon: float, t_s: int, sigma_m: float, g) -> "BernsteinParams":
        """Derive C_1, sigma_F^2 (already multiplied by T_s) and L_z from the inputs."""
        g = np.asarray(g, dtype=np.complex128).reshape(-1)
        c1, sigma_f_sq, l_z = _derived_constants(t_s, g.size, sigma_m, g)
        return cls(epsilon, int(t_s), g.size, float(sigma_m), g, c1, sigma_f_sq, l_z)

    def check(self) -> None:
        if self.epsilon <= 0 or self.t_s < 1 or self.n_r < 1 or self.sigma_m <= 0:
            raise InconsistentParamsError("epsilon, t_s, n_r and sigma_m must be positive")
        if self.g.size != self.n_r:
            raise InconsistentParamsError(f"g has length {self.g.size}, expected {self.n_r}")
        expected = _derived_constants(self.t_s, self.n_r, self.sigma_m, self.g)
        for name, stored, want in zip(("c1", "sigma_f_sq", "l_z"), (self.c1, self.sigma_f_sq, self.l_z), expected):
            if abs(stored - want) > PARAMS_RTOL * max(abs(want), 1e-300):
                raise InconsistentParamsError(f"{name}={stored!r} does not match recomputed {want!r}")

    @property
    def g_norm(self) -> float:
        return float(np.linalg.norm(self.g))


def _derived_constants(t_s: int, n_r: int, sigma_m: float, g: np.ndarray):
    g_sq = float(np.vdot(g, g).real)
    c1 = g_sq + n_r * sigma_m ** 2
    sigma_f_sq = t_s * sigma_m ** 2 * math.sqrt(n_r ** 2 * g_sq ** 2 + 2.0 * c1 * n_r * g_sq + c1 ** 2 * n_r)
    l_z = 2.0 * sigma_m * math.sqrt(n_r) * math.sqrt(g_sq) + (n_r - 1) * sigma_m ** 2
    return c1, sigma_f_sq, l_z


def bernstein_lower_bound(p: BernsteinParams) -> float:
    """
    Lower bound on P(||R_hat - R||_2 < epsilon). Negative values mean the bound
    is vacuous and are returned unchanged.
    """
    p.check()
    exponent = (p.epsilon ** 2 * p.t_s ** 2 / 2.0) / (p.sigma_f_sq + 2.0 * p.l_z * p.epsilon * p.t_s / 3.0)
    return 1.0 - 2.0 * p.n_r * math.exp(-exponent)


def _discrepancy_trial(rng: np.random.Generator, p: BernsteinParams, r_true: np.ndarray) -> bool:
    noise = complex_gaussian(rng, (p.t_s, p.n_r), p.sigma_m ** 2)
    r_hat = sample_covariance(p.g[None, :] + noise)
    return spectral_norm(r_hat - r_true) < p.epsilon


def empirical_discrepancy_probability(seed: int, p: BernsteinParams, trials: int) -> float:
    """
    Fraction of trials where the sample covariance of T_s draws u_t = g + n_t
    lies within epsilon of g g^H + sigma_m^2 I in spectral norm. Trial i draws
    from its own stream keyed by (seed, i).
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    r_true = fixed_signal_covariance(p.g, p.sigma_m ** 2)
    hits = sum(_discrepancy_trial(derive_rng(seed, "bernstein", i), p, r_true) for i in range(trials))
    return hits / trials


def binomial_slack(probability: float, trials: int, n_sigma: float = 3.0) -> float:
    p = min(max(probability, 0.0), 1.0)
    return n_sigma * math.sqrt(p * (1.0 - p) / trials)


def verify_bound_grid(
    seed: int,
    cfg: BernsteinConfig,
    t_s_values: Sequence[int],
    trials: Optional[int] = None,
) -> List[Dict]:
    """
    Evaluate the bound and its Monte-Carlo estimate on every (epsilon, T_s, sigma_m)
    point. Points where the empirical probability falls more than 3 binomial sigmas
    below a positive bound are flagged and logged, not raised.
    """
    trials = trials or cfg.trials
    g = np.full(cfg.n_r, cfg.g_norm / math.sqrt(cfg.n_r), dtype=np.complex128)
    rows = []
    point = 0
    for sigma_m in cfg.sigma_m:
        scale = cfg.g_norm ** 2 + cfg.n_r * sigma_m ** 2
        for factor in cfg.epsilon_factors:
            for t_s in t_s_values:
                p = BernsteinParams.build(factor * scale, int(t_s), sigma_m, g)
                bound = bernstein_lower_bound(p)
                empirical = empirical_discrepancy_probability(derive_seed(seed, point), p, trials)
                vacuous = bound <= 0
                violated = not vacuous and empirical < bound - binomial_slack(bound, trials)
                if violated:
                    logger.warning(
                        f"Bound exceeds empirical probability at eps={p.epsilon:.4g}, T_s={t_s}, "
                        f"sigma_m={sigma_m}: bound={bound:.6f}, empirical={empirical:.6f}"
                    )
                rows.append({
                    "epsilon": p.epsilon,
                    "t_s": int(t_s),
                    "sigma_m": float(sigma_m),
                    "g_norm": p.g_norm,
                    "bound": bound,
                    "empirical_probability": empirical,
                    "trials": trials,
                    "vacuous": vacuous,
                    "violated": violated,
                })
                point += 1
    return rows

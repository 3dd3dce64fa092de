"""
Rank-1 MRC receiver with optional interference whitening.

For every trajectory position one slot is synthesized, the interference-plus-
noise covariance is estimated from the pilot residuals and, when the policy
activates IW, both the received data and the estimated effective channel are
whitened before maximum-ratio combining and hard QPSK decisions.

All policies evaluated with the same seed see the same received signals
(common random numbers), so SER differences between policies come from the
receiver alone.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Sequence, Union

import numpy as np

from ici_whitening.config import ScenarioConfig, TriggerThresholds
from ici_whitening.detectors.base_detector import BaseDetector
from ici_whitening.detectors.features import featurize
from ici_whitening.detectors.triggers import trigger
from ici_whitening.errors import NotPositiveDefiniteError, SingularDiagonalError
from ici_whitening.logging_helper import log_iw_fallback
from ici_whitening.metrics import symbol_error_rate
from ici_whitening.scenario import QPSK, Drop, Reception, csi_im_measure, grid_estimates, synthesize_reception
from ici_whitening.seeding import as_seed, derive_rng
from ici_whitening.whitening import sample_covariance, whitening_filter

logger = logging.getLogger(__name__)

PolicyKind = Literal["always_on", "always_off", "genie", "detector"]


@dataclass(frozen=True)
class IwPolicy:
    kind: PolicyKind
    detector: Optional[BaseDetector] = None
    thresholds: Optional[TriggerThresholds] = None

    def __post_init__(self):
        if self.kind == "detector":
            if self.detector is None or not self.detector.is_fitted:
                raise ValueError("A detector policy needs a fitted detector")
            if self.thresholds is None or self.thresholds.gamma_te is None:
                raise ValueError("A detector policy needs resolved trigger thresholds")
        elif self.kind not in ("always_on", "always_off", "genie"):
            raise ValueError(f"Unknown IW policy '{self.kind}'")

    @classmethod
    def always_on(cls) -> "IwPolicy":
        return cls("always_on")

    @classmethod
    def always_off(cls) -> "IwPolicy":
        return cls("always_off")

    @classmethod
    def genie(cls) -> "IwPolicy":
        return cls("genie")

    @classmethod
    def from_detector(cls, detector: BaseDetector, thresholds: TriggerThresholds) -> "IwPolicy":
        return cls("detector", detector, thresholds)

    @property
    def name(self) -> str:
        return self.detector.name if self.kind == "detector" else self.kind

    def activates(self, drop: Drop, reception: Reception, cfg: ScenarioConfig) -> bool:
        if self.kind == "always_on":
            return True
        if self.kind == "always_off":
            return False
        p = reception.position
        if self.kind == "genie":
            return bool(drop.flags[p])
        fired = trigger(
            "test",
            float(drop.rsrp_serving_dbm[p]),
            float(drop.rsrp_neighbor_dbm[p]),
            csi_im_measure(reception.u),
            self.thresholds,
        )
        return fired and self.detector.is_anomalous(featurize(grid_estimates(reception, cfg)))


@dataclass(frozen=True)
class PositionSer:
    position: int
    ser: float
    errors: int
    symbols: int
    activated: bool
    fallback: bool = False


@dataclass(frozen=True)
class PolicySerResult:
    policy: str
    positions: Sequence[PositionSer] = field(default=())

    @property
    def errors(self) -> int:
        return sum(p.errors for p in self.positions)

    @property
    def symbols(self) -> int:
        return sum(p.symbols for p in self.positions)

    @property
    def ser(self) -> float:
        return self.errors / self.symbols if self.symbols else 0.0

    @property
    def activations(self) -> int:
        return sum(p.activated for p in self.positions)

    @property
    def fallbacks(self) -> int:
        return sum(p.fallback for p in self.positions)


def qpsk_decide(z: np.ndarray) -> np.ndarray:
    """Index of the nearest QPSK point for every soft symbol."""
    z = np.asarray(z).reshape(-1)
    return np.argmin(np.abs(z[:, None] - QPSK[None, :]), axis=1)


def mrc_combine(rx: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Per-symbol h^H y / ||h||^2 for rows of rx (n, N_r) and h (n, N_r)."""
    gain = np.sum(np.abs(h) ** 2, axis=1)
    gain = np.where(gain > 0, gain, 1.0)
    return np.sum(h.conj() * rx, axis=1) / gain


def whitened_mrc(rx: np.ndarray, h: np.ndarray, w: np.ndarray) -> np.ndarray:
    """MRC on W y with the whitened channel W h."""
    return mrc_combine(rx @ w.T, h @ w.T)


def detect_symbols(reception: Reception, cfg: ScenarioConfig, whiten: bool) -> np.ndarray:
    """
    Hard decisions for the data symbols of one reception.

    Raises NotPositiveDefiniteError / SingularDiagonalError when whitening is
    requested but the residual covariance cannot be factorized.
    """
    h = grid_estimates(reception, cfg)[reception.data_subcarriers]
    if whiten:
        w = whitening_filter(sample_covariance(reception.u))
        soft = whitened_mrc(reception.rx_symbols, h, w)
    else:
        soft = mrc_combine(reception.rx_symbols, h)
    return qpsk_decide(soft)


def evaluate_policy_ser(
    drop: Drop,
    policy: IwPolicy,
    cfg: Optional[ScenarioConfig] = None,
    rng: Union[int, np.random.Generator, None] = None,
    symbols_per_position: Optional[int] = None,
    positions: Optional[Sequence[int]] = None,
    noise: bool = True,
) -> PolicySerResult:
    """
    SER of one IW policy at every requested position (default: all).

    Position p draws its slot from derive_rng(seed, "reception", p), where the
    seed defaults to the drop seed. A whitening failure falls back to plain
    MRC for that position and is recorded.
    """
    cfg = cfg or drop.cfg
    seed = drop.seed if rng is None else as_seed(rng)
    n_symbols = cfg.symbols_per_position if symbols_per_position is None else symbols_per_position
    if n_symbols < 1:
        raise ValueError("symbols_per_position must be at least 1")
    indices = range(drop.n_positions) if positions is None else positions

    results: List[PositionSer] = []
    for p in indices:
        reception = synthesize_reception(drop, p, cfg, derive_rng(seed, "reception", p), n_symbols=n_symbols, noise=noise)
        activated = policy.activates(drop, reception, cfg)
        fallback = False
        try:
            decisions = detect_symbols(reception, cfg, whiten=activated)
        except (NotPositiveDefiniteError, SingularDiagonalError) as e:
            fallback = True
            logger.debug(f"{policy.name}: whitening failed at position {p} ({e}); using plain MRC")
            log_iw_fallback(policy.name, p, drop.seed, str(e))
            decisions = detect_symbols(reception, cfg, whiten=False)

        errors = int(np.count_nonzero(decisions != reception.tx_indices))
        results.append(PositionSer(
            position=p,
            ser=symbol_error_rate(reception.tx_indices, decisions),
            errors=errors,
            symbols=n_symbols,
            activated=activated,
            fallback=fallback,
        ))

    result = PolicySerResult(policy.name, tuple(results))
    logger.debug(f"{policy.name}: SER {result.ser:.4g} over {len(results)} positions, {result.activations} activations")
    return result

"""
Deep SVDD on channel-estimate features.

A bias-free tanh network maps features into a low-dimensional embedding and is
trained so that interference-free samples land close to a centre c. The score
of a sample is its squared distance to c. With Z-score refinement, training
features are standardized with pooled dataset statistics and every scored
sample is standardized by its own mean and std.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ici_whitening.config import TrainConfig
from ici_whitening.detectors.base_detector import BaseDetector, nearest_rank_quantile
from ici_whitening.detectors.features import NormalizationStats, zscore_apply, zscore_fit, zscore_sample
from ici_whitening.errors import DimensionMismatchError, EmptyInputError, NonFiniteLossError
from ici_whitening.seeding import derive_rng, derive_seed

logger = logging.getLogger(__name__)

COLLAPSE_EPS = 1e-6


@dataclass(frozen=True)
class MlpParams:
    layer_dims: Tuple[int, ...]
    weights: Tuple[np.ndarray, ...]  # weights[v] has shape (dims[v+1], dims[v])

    def __post_init__(self):
        if len(self.weights) != len(self.layer_dims) - 1:
            raise DimensionMismatchError("Need one weight matrix per layer transition")
        for v, w in enumerate(self.weights):
            if w.shape != (self.layer_dims[v + 1], self.layer_dims[v]):
                raise DimensionMismatchError(f"Layer {v} weight has shape {w.shape}")

    @property
    def n_layers(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class SvddModel:
    params: MlpParams
    center: np.ndarray
    threshold: float
    train_stats: NormalizationStats
    zscore: bool = True
    train_config: Optional[TrainConfig] = None
    history: Tuple[Dict[str, float], ...] = field(default=())

    def prepare(self, x: np.ndarray) -> np.ndarray:
        """Raw feature vector to network input."""
        return zscore_sample(x) if self.zscore else np.asarray(x, dtype=float)


def init_mlp(layer_dims: Sequence[int], rng: np.random.Generator) -> MlpParams:
    """Glorot-uniform weights, no biases."""
    dims = tuple(int(d) for d in layer_dims)
    weights = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
    return MlpParams(dims, tuple(weights))


def _forward(params: MlpParams, x: np.ndarray) -> List[np.ndarray]:
    """Activations of every layer, input first; hidden layers tanh, output linear."""
    a = np.atleast_2d(np.asarray(x, dtype=float))
    if a.shape[1] != params.layer_dims[0]:
        raise DimensionMismatchError(f"Input has {a.shape[1]} features, network expects {params.layer_dims[0]}")
    activations = [a]
    for v, w in enumerate(params.weights):
        z = activations[-1] @ w.T
        activations.append(z if v == params.n_layers - 1 else np.tanh(z))
    return activations


def mlp_forward(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Embedding of one vector (1-D result) or of a batch (2-D result)."""
    out = _forward(params, x)[-1]
    return out[0] if np.asarray(x).ndim == 1 else out


def svdd_objective_and_gradient(
    params: MlpParams,
    center: np.ndarray,
    batch,
    zeta: float,
) -> Tuple[float, Tuple[np.ndarray, ...]]:
    """
    (1/N) sum_i ||Omega(x_i) - c||^2 + (zeta/2) sum_v ||W_v||_F^2 and its
    gradient with respect to every weight matrix.
    """
    x = np.atleast_2d(np.asarray(batch, dtype=float))
    if x.shape[0] == 0:
        raise EmptyInputError("Empty training batch")
    n = x.shape[0]
    acts = _forward(params, x)
    diff = acts[-1] - center[None, :]
    loss = float(np.sum(diff ** 2) / n) + 0.5 * zeta * sum(float(np.sum(w ** 2)) for w in params.weights)

    grads: List[np.ndarray] = [None] * params.n_layers
    dz = 2.0 * diff / n
    for v in range(params.n_layers - 1, -1, -1):
        grads[v] = dz.T @ acts[v] + zeta * params.weights[v]
        if v > 0:
            da = dz @ params.weights[v]
            dz = da * (1.0 - acts[v] ** 2)
    return loss, tuple(grads)


def _center(embeddings: np.ndarray) -> np.ndarray:
    return embeddings.mean(axis=0)


def _objective(params: MlpParams, center: np.ndarray, x: np.ndarray, zeta: float) -> float:
    return svdd_objective_and_gradient(params, center, x, zeta)[0]


def _fit_network(raw: np.ndarray, cfg: TrainConfig, zscore: bool) -> SvddModel:
    """Gradient descent only; the returned model has threshold 0."""
    if zscore:
        stats = zscore_fit(raw)
        x = zscore_apply(stats, raw)
    else:
        stats = NormalizationStats(0.0, 1.0)
        x = raw

    rng = np.random.default_rng(cfg.seed)
    params = init_mlp((x.shape[1],) + tuple(cfg.hidden_dims), rng)
    embeddings = mlp_forward(params, x)
    center = _center(embeddings)
    best = (_objective(params, center, x, cfg.weight_decay), params, center)
    initial_loss = best[0]

    history = [{"epoch": 0, "loss": initial_loss, "embedding_variance": float(embeddings.var(axis=0).mean())}]
    n = x.shape[0]
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n) if n > cfg.batch_size else np.arange(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = svdd_objective_and_gradient(params, center, x[idx], cfg.weight_decay)
            if not np.isfinite(loss):
                raise NonFiniteLossError(f"SVDD loss diverged at epoch {epoch}")
            params = replace(params, weights=tuple(w - cfg.learning_rate * g for w, g in zip(params.weights, grads)))

        embeddings = mlp_forward(params, x)
        center = _center(embeddings)
        epoch_loss = _objective(params, center, x, cfg.weight_decay)
        if not np.isfinite(epoch_loss):
            raise NonFiniteLossError(f"SVDD loss diverged at epoch {epoch}")
        variance = float(embeddings.var(axis=0).mean())
        history.append({"epoch": epoch, "loss": epoch_loss, "embedding_variance": variance})
        logger.debug(f"epoch {epoch}: loss={epoch_loss:.6g} embedding_variance={variance:.6g}")
        if epoch_loss < best[0]:
            best = (epoch_loss, params, center)

    if float(np.linalg.norm(best[2])) < COLLAPSE_EPS:
        logger.warning(f"SVDD centre collapsed to the origin (|c|={np.linalg.norm(best[2]):.3g}); scores may not separate")
    logger.debug(f"SVDD fitted on {n} samples: objective {initial_loss:.6g} -> {best[0]:.6g}")
    return SvddModel(best[1], best[2], 0.0, stats, zscore, cfg, tuple(history))


def out_of_fold_scores(trainset, cfg: TrainConfig, zscore: bool = True) -> np.ndarray:
    """
    Score every training sample with a network fitted on the other folds.

    Samples are split into min(cfg.calibration_folds, N) folds from the
    calibration stream of cfg.seed. A fitted network pulls its own training
    samples towards c, so these scores are what unseen clean samples look like.
    """
    raw = np.asarray(trainset, dtype=float)
    n = raw.shape[0]
    folds = min(cfg.calibration_folds, n)
    if folds < 2:
        raise EmptyInputError(f"Out-of-fold scoring needs at least 2 folds, got {folds}")

    order = derive_rng(cfg.seed, "calibration").permutation(n)
    scores = np.empty(n)
    for k, held in enumerate(np.array_split(order, folds)):
        fit_idx = np.setdiff1d(order, held)
        fold_cfg = cfg.model_copy(update={"seed": derive_seed(cfg.seed, "calibration", k)})
        model = _fit_network(raw[fit_idx], fold_cfg, zscore)
        scores[held] = [svdd_score(model, model.prepare(x)) for x in raw[held]]
    return scores


def svdd_train(trainset, cfg: TrainConfig, zscore: bool = True) -> SvddModel:
    """
    Gradient descent on the SVDD objective for cfg.epochs epochs, recentring c
    on the mean embedding after every epoch. The lowest-objective epoch is kept
    and history[0] holds the objective before the first step.

    Θ is the cfg.threshold_quantile quantile of out-of-fold training scores,
    or of the fitted network's own training scores when fewer than two folds
    are possible.
    """
    raw = np.asarray(trainset, dtype=float)
    if raw.ndim != 2 or raw.shape[0] == 0:
        raise EmptyInputError("SVDD training needs a non-empty (N, F) training set")

    model = _fit_network(raw, cfg, zscore)
    if min(cfg.calibration_folds, raw.shape[0]) >= 2:
        threshold = nearest_rank_quantile(out_of_fold_scores(raw, cfg, zscore), cfg.threshold_quantile)
    else:
        threshold = calibrate_threshold(model, raw, cfg.threshold_quantile)
    logger.info(
        f"SVDD trained on {raw.shape[0]} samples: objective {model.history[0]['loss']:.6g} -> "
        f"{min(h['loss'] for h in model.history):.6g}, threshold {threshold:.6g}"
    )
    return replace(model, threshold=threshold)


def svdd_score(model: SvddModel, x: np.ndarray) -> float:
    """Squared distance of an already-prepared input's embedding to the centre."""
    embedding = mlp_forward(model.params, np.asarray(x, dtype=float).reshape(-1))
    return float(np.sum((embedding - model.center) ** 2))


def calibrate_threshold(model: SvddModel, trainset, quantile: float = 0.95) -> float:
    """Nearest-rank quantile of the training scores, each sample prepared as at test time."""
    scores = [svdd_score(model, model.prepare(x)) for x in trainset]
    return nearest_rank_quantile(scores, quantile)


def model_to_dict(model: SvddModel) -> Dict:
    return {
        "layer_dims": list(model.params.layer_dims),
        "weights": [w.reshape(-1).tolist() for w in model.params.weights],
        "center": model.center.tolist(),
        "threshold": model.threshold,
        "train_stats": {"mean": model.train_stats.mean, "std": model.train_stats.std},
        "zscore": model.zscore,
        "train_config": model.train_config.model_dump(mode="json") if model.train_config else None,
        "history": list(model.history),
    }


def model_from_dict(data: Dict) -> SvddModel:
    dims = tuple(data["layer_dims"])
    weights = tuple(
        np.array(flat, dtype=float).reshape(dims[v + 1], dims[v]) for v, flat in enumerate(data["weights"])
    )
    cfg = data.get("train_config")
    return SvddModel(
        params=MlpParams(dims, weights),
        center=np.array(data["center"], dtype=float),
        threshold=float(data["threshold"]),
        train_stats=NormalizationStats(**data["train_stats"]),
        zscore=bool(data.get("zscore", True)),
        train_config=TrainConfig.model_validate(cfg) if cfg else None,
        history=tuple(data.get("history", ())),
    )


class SvddDetector(BaseDetector):
    """Deep SVDD behind the common detector interface."""

    def __init__(self, name: str, train_config: TrainConfig, zscore: bool = True):
        super().__init__(name, zscore=zscore)
        self.train_config = train_config
        self.zscore = zscore
        self.model: Optional[SvddModel] = None

    def _fit(self, data: np.ndarray) -> None:
        self.model = svdd_train(data, self.train_config, zscore=self.zscore)
        self.threshold = self.model.threshold

    def score(self, x: np.ndarray) -> float:
        return svdd_score(self.model, self.model.prepare(x))

"""
Experiment configuration.

Typed settings for the channel, scenario, detectors, triggers and the
concentration-bound sweep, plus a strict parser for the sectioned
``key = value`` experiment file format:

    # comment
    kind = f1_vs_nt
    grid = 30, 40, 50
    [scenario]
    interfered_indices = 60-67, 85-89, 120-122

Unknown keys are errors. Defaults follow the 28 GHz simulation setup.
"""

import logging
import math
import re
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, ValidationError, field_validator, model_validator

from ici_whitening.errors import InvalidSpecError, ParseError, UnknownKeyError
from ici_whitening.seeding import MAX_SEED

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 299_792_458.0
SUBCARRIERS_PER_RB = 12

EXPERIMENT_KINDS = ("f1_vs_nt", "f1_vs_nf", "detection_vs_radius", "ser_vs_radius", "bernstein")
DETECTOR_NAMES = ("zrd_svdd", "svdd_no_zscore", "ocsvm", "knn5", "knn20")
SECTIONS = ("scenario", "channel", "train", "baselines", "triggers", "bernstein")

_RANGE = re.compile(r"^(\d+)\s*-\s*(\d+)$")


def _split_list(value: Any) -> Any:
    """Comma lists with inclusive ``a-b`` integer ranges."""
    if not isinstance(value, str):
        return value
    items: List[str] = []
    for token in value.split(","):
        token = token.strip()
        if not token:
            continue
        match = _RANGE.match(token)
        if match:
            start, stop = int(match.group(1)), int(match.group(2))
            if stop < start:
                raise ValueError(f"Descending range '{token}'")
            items.extend(str(i) for i in range(start, stop + 1))
        else:
            items.append(token)
    return items


def _none_literal(value: Any) -> Any:
    if isinstance(value, str) and value.strip().lower() in ("none", "auto", ""):
        return None
    return value


IntList = Annotated[Tuple[int, ...], BeforeValidator(_split_list)]
FloatList = Annotated[Tuple[float, ...], BeforeValidator(_split_list)]
OptionalFloat = Annotated[Optional[float], BeforeValidator(_none_literal)]
OptionalInt = Annotated[Optional[int], BeforeValidator(_none_literal)]


class _Settings(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def calibrated_reference_loss(
    edge_snr_db: float = 10.0,
    cell_radius_m: float = 40.0,
    tx_power_dbm: float = 30.0,
    noise_density_dbm_hz: float = -174.0,
    subcarrier_spacing_hz: float = 120e3,
    n_paths: int = 20,
    n_tx_antennas: int = 8,
    pathloss_exponent: float = 2.0,
    segments: int = 2,
) -> float:
    """
    Reference loss P_0 giving the requested SNR for a UE at the cell edge.

    Every path is modelled as two segments of length cell_radius_m, the paths
    add in power and the transmit beam contributes a gain of n_tx_antennas.
    """
    tx_mw = 10.0 ** (tx_power_dbm / 10.0)
    noise_mw = 10.0 ** (noise_density_dbm_hz / 10.0) * subcarrier_spacing_hz
    target = 10.0 ** (edge_snr_db / 10.0) * noise_mw
    per_path = target / (tx_mw * n_tx_antennas * n_paths)
    # per_path = (sqrt(P_0 / 4pi) / R^(gamma/2))^(2 * segments)
    root = per_path ** (1.0 / (2 * segments)) * cell_radius_m ** (pathloss_exponent / 2.0)
    return 4.0 * math.pi * root ** 2


DEFAULT_REFERENCE_LOSS = calibrated_reference_loss()


class ChannelParams(_Settings):
    """Radio and geometric channel parameters."""
    carrier_hz: float = Field(28e9, gt=0, description="Carrier frequency f_c")
    sampling_hz: float = Field(122.88e6, gt=0, description="Sampling frequency f_s")
    total_subcarriers: int = Field(1024, ge=1, description="FFT size K")
    subcarrier_spacing_hz: float = Field(120e3, gt=0, description="Subcarrier spacing W")
    noise_density_dbm_hz: float = Field(-174.0, description="Noise spectral density N_0")
    n_clusters: int = Field(4, ge=1)
    paths_per_cluster: int = Field(5, ge=1)
    reference_loss: float = Field(DEFAULT_REFERENCE_LOSS, gt=0, description="Reference loss P_0")
    pathloss_exponent: float = Field(2.0, ge=0)
    n_tx_antennas: int = Field(8, ge=1, description="gNB antennas M_t")
    n_rx_antennas: int = Field(4, ge=1, description="UE antennas N_r")
    antenna_spacing: float = Field(0.5, gt=0, description="Antenna spacing over wavelength d/lambda")
    scatterer_spread_m: float = Field(5.0, ge=0)

    @property
    def noise_variance_mw(self) -> float:
        """Per-subcarrier noise power sigma^2 = N_0 * W in mW."""
        return 10.0 ** (self.noise_density_dbm_hz / 10.0) * self.subcarrier_spacing_hz

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_hz


def _default_train_indices() -> Tuple[int, ...]:
    return tuple(range(0, 50)) + tuple(range(150, 200))


def _default_test_indices() -> Tuple[int, ...]:
    return tuple(range(50, 150))


def _default_interfered_indices() -> Tuple[int, ...]:
    return tuple(range(60, 68)) + tuple(range(85, 90)) + tuple(range(120, 123))


class ScenarioConfig(_Settings):
    """Two-cell trajectory experiment. Indices are 0-based positions."""
    cell_radius_m: float = Field(40.0, gt=0)
    n_neighbors: int = Field(1, ge=1, le=6, description="Neighbouring gNBs N_c")
    tx_power_serving_dbm: float = 30.0
    tx_power_interferer_dbm: float = 30.0
    ue_speed_mps: float = Field(3.0, gt=0)
    step_m: float = Field(0.1, gt=0)
    n_positions: int = Field(200, ge=1)
    rb_count: int = Field(20, ge=1)
    n_f_per_rb: int = Field(12, ge=1, le=SUBCARRIERS_PER_RB, description="Pilot REs per RB N_f")
    n_pilot_symbols: int = Field(2, ge=2)
    symbols_per_position: int = Field(10_000, ge=1)
    train_indices: IntList = Field(default_factory=_default_train_indices)
    test_indices: IntList = Field(default_factory=_default_test_indices)
    interfered_indices: IntList = Field(default_factory=_default_interfered_indices)
    seed: int = Field(0, ge=0, le=MAX_SEED)

    @model_validator(mode="after")
    def check_index_sets(self):
        for name in ("train_indices", "test_indices", "interfered_indices"):
            bad = [i for i in getattr(self, name) if i < 0 or i >= self.n_positions]
            if bad:
                raise ValueError(f"{name} outside [0, {self.n_positions}): {bad[:5]}")
        if set(self.train_indices) & set(self.test_indices):
            raise ValueError("train_indices and test_indices overlap")
        if not set(self.interfered_indices) <= set(self.test_indices):
            raise ValueError("interfered_indices must be a subset of test_indices")
        return self

    @property
    def n_subcarriers(self) -> int:
        return self.rb_count * SUBCARRIERS_PER_RB

    @property
    def sampling_period_s(self) -> float:
        return self.step_m / self.ue_speed_mps


class TrainConfig(_Settings):
    """Deep SVDD training settings."""
    epochs: int = Field(100, ge=1)
    learning_rate: float = Field(1e-3, gt=0)
    weight_decay: float = Field(1e-3, ge=0, description="Regularization zeta")
    batch_size: int = Field(128, ge=1, description="Full batch when the training set is no larger")
    hidden_dims: IntList = (64, 32, 16)
    threshold_quantile: float = Field(0.95, gt=0, le=1)
    calibration_folds: int = Field(5, ge=0, description="Folds for out-of-fold threshold calibration; below 2 scores the fit set itself")
    seed: int = Field(0, ge=0, le=MAX_SEED)

    @field_validator("hidden_dims")
    @classmethod
    def validate_hidden_dims(cls, v):
        if not v or any(d < 1 for d in v):
            raise ValueError("hidden_dims must be a non-empty list of positive integers")
        return v


class BaselineConfig(_Settings):
    """One-class SVM and k-NN baselines."""
    ocsvm_nu: float = Field(0.1, gt=0, le=1)
    ocsvm_bandwidth: OptionalFloat = Field(None, description="RBF bandwidth; None uses the median heuristic")
    ocsvm_tol: float = Field(1e-6, gt=0)
    ocsvm_max_iter: int = Field(100_000, ge=1)
    knn_threshold_quantile: float = Field(0.95, gt=0, le=1)

    @field_validator("ocsvm_bandwidth")
    @classmethod
    def validate_bandwidth(cls, v):
        if v is not None and v <= 0:
            raise ValueError("ocsvm_bandwidth must be positive")
        return v


class TriggerThresholds(_Settings):
    """RSRP-gap and CSI-IM trigger thresholds. None CSI-IM thresholds resolve to twice the noise power."""
    rho_tr_db: float = 10.0
    gamma_tr: OptionalFloat = None
    rho_te_db: float = 3.0
    gamma_te: OptionalFloat = None

    def resolved(self, noise_variance: float) -> "TriggerThresholds":
        return self.model_copy(update={
            "gamma_tr": 2.0 * noise_variance if self.gamma_tr is None else self.gamma_tr,
            "gamma_te": 2.0 * noise_variance if self.gamma_te is None else self.gamma_te,
        })


class BernsteinConfig(_Settings):
    """Concentration-bound sweep. Tolerances are multiples of ||g||^2 + N_r sigma_m^2."""
    epsilon_factors: FloatList = (0.5, 1.0, 2.0, 4.0)
    sigma_m: FloatList = (0.1, 1.0)
    n_r: int = Field(4, ge=1)
    g_norm: float = Field(1.0, ge=0)
    trials: int = Field(2000, ge=1)


class ExperimentSpec(_Settings):
    """One experiment: a kind, its sweep grid and the base settings."""
    kind: Literal["f1_vs_nt", "f1_vs_nf", "detection_vs_radius", "ser_vs_radius", "bernstein"]
    grid: FloatList
    n_drops: int = Field(10, ge=1)
    detectors: Annotated[
        Tuple[Literal["zrd_svdd", "svdd_no_zscore", "ocsvm", "knn5", "knn20"], ...],
        BeforeValidator(_split_list),
    ] = DETECTOR_NAMES
    n_train: OptionalInt = Field(None, description="Training subsample size for radius sweeps")
    output_dir: str = "results"
    scenario: ScenarioConfig = Field(default_factory=ScenarioConfig)
    channel: ChannelParams = Field(default_factory=ChannelParams)
    train: TrainConfig = Field(default_factory=TrainConfig)
    baselines: BaselineConfig = Field(default_factory=BaselineConfig)
    triggers: TriggerThresholds = Field(default_factory=TriggerThresholds)
    bernstein: BernsteinConfig = Field(default_factory=BernsteinConfig)

    @model_validator(mode="after")
    def check_grid(self):
        if not self.grid:
            raise ValueError("grid must not be empty")
        if self.kind in ("f1_vs_nt", "f1_vs_nf", "bernstein"):
            if any(v != int(v) or v < 1 for v in self.grid):
                raise ValueError(f"grid for {self.kind} must hold positive integers")
        if self.kind == "f1_vs_nt" and max(self.grid) > len(self.scenario.train_indices):
            raise ValueError("N_t grid exceeds the number of training positions")
        if self.kind == "f1_vs_nf" and max(self.grid) > SUBCARRIERS_PER_RB:
            raise ValueError(f"N_f grid values must not exceed {SUBCARRIERS_PER_RB}")
        if self.kind in ("detection_vs_radius", "ser_vs_radius") and min(self.grid) <= 0:
            raise ValueError("radius grid must be positive")
        if self.n_train is not None and not 1 <= self.n_train <= len(self.scenario.train_indices):
            raise ValueError("n_train must lie in [1, number of training positions]")
        return self


# ========== Parsing ==========

def parse_config_text(text: str) -> ExperimentSpec:
    """Parse experiment text into a validated ExperimentSpec."""
    raw: Dict[str, Any] = {}
    lines: Dict[Tuple[Optional[str], str], int] = {}
    section: Optional[str] = None

    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue

        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ParseError("Unterminated section header", line=number)
            section = stripped[1:-1].strip()
            if section not in SECTIONS:
                raise UnknownKeyError(f"Unknown section '{section}'", line=number, key=section)
            raw.setdefault(section, {})
            continue

        if "=" not in stripped:
            raise ParseError("Expected 'key = value'", line=number)
        key, value = (part.strip() for part in stripped.split("=", 1))
        if not key:
            raise ParseError("Empty key", line=number)

        target = raw if section is None else raw[section]
        if key in target:
            raise ParseError("Duplicate key", line=number, key=key)
        target[key] = value
        lines[(section, key)] = number

    try:
        return ExperimentSpec.model_validate(raw)
    except ValidationError as e:
        raise _to_config_error(e, lines) from e


def parse_config(path) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"Cannot read config file {path}: {e}") from e
    spec = parse_config_text(text)
    logger.info(f"Loaded {spec.kind} experiment from {path} ({len(spec.grid)} grid points, {spec.n_drops} drops)")
    return spec


def _to_config_error(error: ValidationError, lines: Dict[Tuple[Optional[str], str], int]) -> ParseError:
    first = error.errors()[0]
    loc = [str(part) for part in first["loc"]]
    section = loc[0] if len(loc) > 1 and loc[0] in SECTIONS else None
    key = loc[1] if section else (loc[0] if loc else None)
    line = lines.get((section, key)) if key else None
    name = f"{section}.{key}" if section and key else key

    if first["type"] == "extra_forbidden":
        return UnknownKeyError("Unknown key", line=line, key=name)
    if first["type"] == "missing":
        return InvalidSpecError("Missing required key", key=name)
    return InvalidSpecError(first["msg"], line=line, key=name)


# ========== Dumping ==========

def _format_scalar(value: Any) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        if value.is_integer() and abs(value) < 1e15:
            return str(int(value))
        return repr(value)
    if value is None:
        return "none"
    return str(value)


def _format_value(value: Any) -> str:
    if isinstance(value, (tuple, list)):
        return ", ".join(_format_scalar(v) for v in value)
    return _format_scalar(value)


def dump_config(spec: ExperimentSpec) -> str:
    """Render the fully resolved experiment in the same grammar parse_config reads."""
    out = []
    data = spec.model_dump()
    for key, value in data.items():
        if key not in SECTIONS:
            out.append(f"{key} = {_format_value(value)}")
    for section in SECTIONS:
        out.append("")
        out.append(f"[{section}]")
        for key, value in data[section].items():
            out.append(f"{key} = {_format_value(value)}")
    return "\n".join(out) + "\n"

"""
Storage module for saving and loading trained models, drops and datasets.

Everything is JSON. Python's json writes floats with repr(), so float64
values round-trip exactly; complex arrays are stored as [real, imag] pairs.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from ici_whitening.config import ChannelParams, ScenarioConfig
from ici_whitening.detectors.svdd import SvddModel, model_from_dict, model_to_dict
from ici_whitening.scenario import Drop, LabeledSample

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _complex_to_list(a: np.ndarray) -> List:
    a = np.asarray(a, dtype=np.complex128)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _list_to_complex(data) -> np.ndarray:
    a = np.asarray(data, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def _write_json(path: PathLike, data: Any) -> bool:
    try:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(data, f, indent=2)
        return True
    except (OSError, TypeError, ValueError) as e:
        logger.error(f"Error saving {path}: {e}")
        return False


def _read_json(path: PathLike) -> Optional[Any]:
    path = Path(path)
    if not path.exists():
        logger.warning(f"{path} does not exist")
        return None
    try:
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)
    except (OSError, ValueError) as e:
        logger.error(f"Error loading {path}: {e}")
        return None


# ========== Models ==========

def save_model(model: SvddModel, path: PathLike) -> bool:
    """
    Save a trained SVDD model.

    Args:
        model: Trained model, including its threshold and training statistics
        path: Destination JSON file

    Returns:
        True if successful, False otherwise
    """
    return _write_json(path, model_to_dict(model))


def load_model(path: PathLike) -> Optional[SvddModel]:
    data = _read_json(path)
    return model_from_dict(data) if data is not None else None


# ========== Drops ==========

def drop_to_dict(drop: Drop) -> Dict[str, Any]:
    return {
        "seed": drop.seed,
        "scenario": drop.cfg.model_dump(mode="json"),
        "channel": drop.params.model_dump(mode="json"),
        "serving_effective": _complex_to_list(drop.serving_effective),
        "interfering_effective": _complex_to_list(drop.interfering_effective),
        "serving_precoders": _complex_to_list(drop.serving_precoders),
        "interferer_precoders": _complex_to_list(drop.interferer_precoders),
        "rsrp_serving_dbm": drop.rsrp_serving_dbm.tolist(),
        "rsrp_neighbor_dbm": drop.rsrp_neighbor_dbm.tolist(),
        "ue_positions_m": drop.ue_positions_m.tolist(),
        "flags": drop.flags.tolist(),
    }


def drop_from_dict(data: Dict[str, Any]) -> Drop:
    return Drop(
        seed=int(data["seed"]),
        cfg=ScenarioConfig.model_validate(data["scenario"]),
        params=ChannelParams.model_validate(data["channel"]),
        serving_effective=_list_to_complex(data["serving_effective"]),
        interfering_effective=_list_to_complex(data["interfering_effective"]),
        serving_precoders=_list_to_complex(data["serving_precoders"]),
        interferer_precoders=_list_to_complex(data["interferer_precoders"]),
        rsrp_serving_dbm=np.asarray(data["rsrp_serving_dbm"], dtype=float),
        rsrp_neighbor_dbm=np.asarray(data["rsrp_neighbor_dbm"], dtype=float),
        ue_positions_m=np.asarray(data["ue_positions_m"], dtype=float),
        flags=np.asarray(data["flags"], dtype=bool),
    )


def save_drop(drop: Drop, path: PathLike) -> bool:
    return _write_json(path, drop_to_dict(drop))


def load_drop(path: PathLike) -> Optional[Drop]:
    data = _read_json(path)
    return drop_from_dict(data) if data is not None else None


# ========== Datasets ==========

def save_dataset(samples: Sequence[LabeledSample], path: PathLike) -> bool:
    """Dump a dataset as a JSON array of {position, label, features, ...} objects."""
    return _write_json(path, [
        {
            "position": s.position_index,
            "label": s.label,
            "features": np.asarray(s.features, dtype=float).tolist(),
            "rsrp_serving_dbm": s.rsrp_serving_dbm,
            "rsrp_neighbor_dbm": s.rsrp_neighbor_dbm,
            "csi_im": s.csi_im,
        }
        for s in samples
    ])


def load_dataset(path: PathLike) -> Optional[List[LabeledSample]]:
    data = _read_json(path)
    if data is None:
        return None
    return [
        LabeledSample(
            features=np.asarray(item["features"], dtype=float),
            label=bool(item["label"]),
            position_index=int(item["position"]),
            rsrp_serving_dbm=float(item.get("rsrp_serving_dbm", 0.0)),
            rsrp_neighbor_dbm=float(item.get("rsrp_neighbor_dbm", 0.0)),
            csi_im=float(item.get("csi_im", 0.0)),
        )
        for item in data
    ]

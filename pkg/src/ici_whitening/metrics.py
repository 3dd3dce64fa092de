"""
Detection and link metrics.

Positive means "ICI present". Ratios with a zero denominator are reported as
UNDEFINED rather than NaN so that sweep aggregation never averages over a
silent NaN.
"""

from dataclasses import dataclass
from typing import Dict, Sequence, Union

import numpy as np

from ici_whitening.errors import EmptyInputError, LengthMismatchError


class _Undefined:
    """Marker for a ratio whose denominator is zero."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UNDEFINED"

    def __bool__(self) -> bool:
        return False

    def __reduce__(self):
        return (_Undefined, ())


UNDEFINED = _Undefined()

Metric = Union[float, _Undefined]


def is_undefined(value) -> bool:
    return value is UNDEFINED


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("Confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(predictions: Sequence[bool], labels: Sequence[bool]) -> ConfusionMatrix:
    pred = np.asarray(predictions, dtype=bool).reshape(-1)
    truth = np.asarray(labels, dtype=bool).reshape(-1)
    if pred.size != truth.size:
        raise LengthMismatchError(f"{pred.size} predictions for {truth.size} labels")
    if pred.size == 0:
        raise EmptyInputError("Confusion matrix of an empty sample")
    return ConfusionMatrix(
        tp=int(np.sum(pred & truth)),
        fp=int(np.sum(pred & ~truth)),
        fn=int(np.sum(~pred & truth)),
        tn=int(np.sum(~pred & ~truth)),
    )


def _ratio(num: int, den: int) -> Metric:
    return num / den if den else UNDEFINED


def classification_metrics(cm: ConfusionMatrix) -> Dict[str, Metric]:
    """Sensitivity, precision and their harmonic mean (F1)."""
    sensitivity = _ratio(cm.tp, cm.tp + cm.fn)
    precision = _ratio(cm.tp, cm.tp + cm.fp)
    if is_undefined(sensitivity) or is_undefined(precision) or precision + sensitivity == 0:
        f1 = UNDEFINED
    else:
        f1 = 2.0 * precision * sensitivity / (precision + sensitivity)
    return {"sensitivity": sensitivity, "precision": precision, "f1": f1}


def symbol_error_rate(tx_symbols, decisions) -> float:
    tx = np.asarray(tx_symbols).reshape(-1)
    rx = np.asarray(decisions).reshape(-1)
    if tx.size != rx.size:
        raise LengthMismatchError(f"{tx.size} transmitted symbols for {rx.size} decisions")
    if tx.size == 0:
        raise EmptyInputError("SER of an empty symbol stream")
    return float(np.count_nonzero(tx != rx) / tx.size)


def mean_defined(values: Sequence[Metric]) -> Metric:
    """Arithmetic mean over the defined entries; UNDEFINED if there are none."""
    defined = [float(v) for v in values if not is_undefined(v)]
    return float(np.mean(defined)) if defined else UNDEFINED

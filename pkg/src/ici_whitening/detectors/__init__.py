"""
Detectors Package

One-class interference detectors trained on interference-free channel
estimates: Z-score refined deep SVDD, plain deep SVDD, one-class SVM and
k-nearest-neighbour scoring, plus the RSRP / CSI-IM triggers that gate them.
"""

from .base_detector import BaseDetector
from .detector_registry import DetectorRegistry

__all__ = [
    'BaseDetector',
    'DetectorRegistry',
]

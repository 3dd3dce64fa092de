"""
Detector Registry

Central registry of the available interference detectors. Provides a factory
that builds a fresh, unfitted detector for a name and the experiment settings.
"""

import logging
from typing import Any, Dict, List

from ici_whitening.config import BaselineConfig, TrainConfig
from ici_whitening.errors import UnknownDetectorError

from .base_detector import BaseDetector
from .knn import KnnDetector
from .ocsvm import OcSvmDetector
from .svdd import SvddDetector

logger = logging.getLogger(__name__)


class DetectorRegistry:
    """
    Registry for all available detectors.

    DETECTORS maps a detector name to its metadata; get_detector() builds the
    matching BaseDetector subclass.
    """

    DETECTORS = {
        'zrd_svdd': {
            'family': 'svdd',
            'display_name': 'ZRD-SVDD',
            'description': 'Deep SVDD with pooled Z-score training and per-sample Z-score testing',
            'zscore': True,
        },
        'svdd_no_zscore': {
            'family': 'svdd',
            'display_name': 'Deep SVDD',
            'description': 'Deep SVDD on raw features',
            'zscore': False,
        },
        'ocsvm': {
            'family': 'ocsvm',
            'display_name': 'OC-SVM',
            'description': 'One-class SVM with an RBF kernel',
        },
        'knn5': {
            'family': 'knn',
            'display_name': 'k-NN (k=5)',
            'description': 'Mean distance to the 5 nearest training samples',
            'k': 5,
        },
        'knn20': {
            'family': 'knn',
            'display_name': 'k-NN (k=20)',
            'description': 'Mean distance to the 20 nearest training samples',
            'k': 20,
        },
    }

    @classmethod
    def get_detector(cls, name: str, train: TrainConfig, baselines: BaselineConfig) -> BaseDetector:
        """
        Factory method for an unfitted detector.

        Raises:
            UnknownDetectorError: If the name is not registered
        """
        if name not in cls.DETECTORS:
            raise UnknownDetectorError(
                f"Detector '{name}' not found. Available detectors: {', '.join(cls.list_detectors())}"
            )
        info = cls.DETECTORS[name]
        family = info['family']

        if family == 'svdd':
            return SvddDetector(name, train, zscore=info['zscore'])
        if family == 'ocsvm':
            return OcSvmDetector(
                name,
                nu=baselines.ocsvm_nu,
                bandwidth=baselines.ocsvm_bandwidth,
                tol=baselines.ocsvm_tol,
                max_iter=baselines.ocsvm_max_iter,
            )
        return KnnDetector(name, k=info['k'], quantile=baselines.knn_threshold_quantile)

    @classmethod
    def list_detectors(cls) -> List[str]:
        return list(cls.DETECTORS)

    @classmethod
    def get_detector_info(cls, name: str) -> Dict[str, Any]:
        if name not in cls.DETECTORS:
            raise UnknownDetectorError(f"Detector '{name}' not found")
        return {'name': name, **cls.DETECTORS[name]}

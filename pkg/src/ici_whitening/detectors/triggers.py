"""
RSRP / CSI-IM triggers.

Training starts where the serving cell dominates or the measured
interference is low; detection runs where the two cells are comparable or
the measured interference is high.
"""

from typing import Literal

from ici_whitening.config import TriggerThresholds


def trigger(
    phase: Literal["train", "test"],
    rsrp_s_dbm: float,
    rsrp_n_dbm: float,
    csi_im: float,
    th: TriggerThresholds,
) -> bool:
    if th.gamma_tr is None or th.gamma_te is None:
        raise ValueError("CSI-IM thresholds are unresolved; call TriggerThresholds.resolved() first")
    gap = rsrp_s_dbm - rsrp_n_dbm
    if phase == "train":
        return gap >= th.rho_tr_db or csi_im <= th.gamma_tr
    if phase == "test":
        return abs(gap) < th.rho_te_db or csi_im > th.gamma_te
    raise ValueError(f"Unknown trigger phase '{phase}'")

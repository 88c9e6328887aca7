"""
閾値ポリシーの適用サービス
"""
from typing import Optional

import numpy as np

from app.schemas.schemas import FittedThresholds, PolicyKind, ThresholdPolicy
from app.services.decision.core.threshold_engine import fit_global_threshold, fit_groupwise_thresholds
from app.services.shared.exceptions import MissingGroups


def fit_thresholds(
    policy: ThresholdPolicy,
    scores: np.ndarray,
    labels: np.ndarray,
    groups: Optional[np.ndarray] = None,
) -> FittedThresholds:
    """
    ポリシーに従って閾値をフィッティング

    Args:
        policy (ThresholdPolicy): global / groupwise と目標FPR
        scores (np.ndarray): スコア
        labels (np.ndarray): フィッティングに使うラベル
        groups (Optional[np.ndarray]): グループ名（groupwise では必須）

    Returns:
        FittedThresholds: フィッティング結果
    """
    if policy.kind == PolicyKind.GLOBAL:
        return fit_global_threshold(scores, labels, policy.target_fpr)
    if groups is None:
        raise MissingGroups("グループ別閾値のフィッティングにはグループ列が必要です")
    return fit_groupwise_thresholds(scores, labels, groups, policy.target_fpr)

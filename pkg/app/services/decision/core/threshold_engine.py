"""
目標FPRでの閾値フィッティングと適用
"""
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from app.schemas.schemas import FittedThresholds, PolicyKind
from app.services.decision.config.decision_config import SCORE_UPPER_BOUND
from app.services.shared.exceptions import MissingGroups, NoNegativesForFPR, NoNegativesForGroup
from app.services.shared.logging_utils import log_simulation_debug


@dataclass(frozen=True)
class CutoffFit:
    cutoff: float
    fpr: float
    tpr: Optional[float]


def sentinel_cutoff(max_score: float) -> float:
    """最大スコアより大きい番兵閾値（可能なら 1.0）"""
    if max_score < SCORE_UPPER_BOUND:
        return SCORE_UPPER_BOUND
    return float(np.nextafter(max_score, np.inf))


def fit_cutoff(scores: np.ndarray, labels: np.ndarray, target_fpr: float) -> CutoffFit:
    """
    FPR <= target_fpr を満たす最小の閾値を求める

    候補は異なるスコア値と最大値より上の番兵。score >= cutoff で陽性判定するため、
    同じスコアは常に同じ判定になる。

    Raises:
        NoNegativesForFPR: 負例が無い
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    negatives = np.sort(scores[labels == 0])
    positives = np.sort(scores[labels == 1])
    n_neg, n_pos = negatives.size, positives.size
    if n_neg == 0:
        raise NoNegativesForFPR("負例が無いためFPRを計算できません")

    candidates = np.append(np.unique(scores), sentinel_cutoff(float(scores.max())))
    fp = n_neg - np.searchsorted(negatives, candidates, side="left")
    feasible = np.flatnonzero(fp / n_neg <= target_fpr)
    k = int(feasible[0])
    cutoff = float(candidates[k])
    tpr = None
    if n_pos:
        tpr = float((n_pos - np.searchsorted(positives, cutoff, side="left")) / n_pos)
    return CutoffFit(cutoff=cutoff, fpr=float(fp[k] / n_neg), tpr=tpr)


def fit_global_threshold(scores: np.ndarray, labels: np.ndarray, target_fpr: float) -> FittedThresholds:
    """
    全体閾値をフィッティング

    Args:
        scores (np.ndarray): スコア
        labels (np.ndarray): ラベル（0/1）
        target_fpr (float): 目標FPR（上限）

    Returns:
        FittedThresholds: フィッティング集合で FPR <= target_fpr を満たす閾値

    Raises:
        NoNegativesForFPR: 負例が無い
    """
    fit = fit_cutoff(scores, labels, target_fpr)
    log_simulation_debug("全体閾値", {"cutoff": fit.cutoff, "fpr": fit.fpr, "tpr": fit.tpr})
    return FittedThresholds(
        kind=PolicyKind.GLOBAL,
        target_fpr=target_fpr,
        global_cutoff=fit.cutoff,
        achieved_fpr=fit.fpr,
        achieved_tpr=fit.tpr,
    )


def fit_groupwise_thresholds(
    scores: np.ndarray,
    labels: np.ndarray,
    groups: np.ndarray,
    target_fpr: float,
) -> FittedThresholds:
    """
    グループ別閾値をフィッティング（予測平等性の事後介入）

    各グループで独立に FPR <= target_fpr を満たす最小閾値を選ぶ。
    有限標本では達成FPRの厳密な一致は不可能で、どちらも目標以下で最大のFPRになる。

    Args:
        scores (np.ndarray): スコア
        labels (np.ndarray): ラベル（0/1）
        groups (np.ndarray): グループ名（'A' / 'B'）
        target_fpr (float): 目標FPR（上限）

    Returns:
        FittedThresholds: グループ別閾値

    Raises:
        NoNegativesForGroup: 負例の無いグループがある
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    groups = np.asarray(groups).astype(str)

    cutoffs: Dict[str, float] = {}
    fprs: Dict[str, float] = {}
    tprs: Dict[str, Optional[float]] = {}
    for group in sorted(set(groups.tolist())):
        mask = groups == group
        try:
            fit = fit_cutoff(scores[mask], labels[mask], target_fpr)
        except NoNegativesForFPR:
            raise NoNegativesForGroup(group) from None
        cutoffs[group], fprs[group], tprs[group] = fit.cutoff, fit.fpr, fit.tpr

    decisions = _decide_groupwise(scores, groups, cutoffs)
    negatives = labels == 0
    positives = labels == 1
    overall_tpr = float(decisions[positives].mean()) if positives.any() else None
    log_simulation_debug("グループ別閾値", {"cutoffs": cutoffs, "fpr": fprs})
    return FittedThresholds(
        kind=PolicyKind.GROUPWISE,
        target_fpr=target_fpr,
        group_cutoffs=cutoffs,
        achieved_fpr=float(decisions[negatives].mean()),
        achieved_tpr=overall_tpr,
        group_achieved_fpr=fprs,
        group_achieved_tpr=tprs,
    )


def _decide_groupwise(scores: np.ndarray, groups: np.ndarray, cutoffs: Dict[str, float]) -> np.ndarray:
    missing = sorted(set(groups.tolist()) - set(cutoffs))
    if missing:
        raise MissingGroups(f"閾値が未定義のグループがあります: {missing}")
    row_cutoffs = np.empty(scores.shape[0], dtype=np.float64)
    for group, cutoff in cutoffs.items():
        row_cutoffs[groups == group] = cutoff
    return (scores >= row_cutoffs).astype(np.int8)


def apply_thresholds(
    scores: np.ndarray,
    groups: Optional[np.ndarray],
    fitted: FittedThresholds,
) -> np.ndarray:
    """
    スコアを0/1の判定に変換（score >= cutoff で1）

    Raises:
        MissingGroups: グループ別閾値なのにグループ列が無い、または閾値の無いグループがある
    """
    scores = np.asarray(scores, dtype=np.float64)
    if fitted.kind == PolicyKind.GLOBAL:
        return (scores >= fitted.global_cutoff).astype(np.int8)
    if groups is None:
        raise MissingGroups("グループ別閾値の適用にはグループ列が必要です")
    return _decide_groupwise(scores, np.asarray(groups).astype(str), fitted.group_cutoffs)

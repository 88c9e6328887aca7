"""
選択的ラベルのフィードバック（予測による観測ラベルの書き換え）
"""
from typing import Dict, Optional, Tuple

import numpy as np

from app.schemas.schemas import FittedThresholds, LedgerEntry, PolicyKind
from app.services.decision.core.threshold_engine import apply_thresholds
from app.services.learners.core.model import Model
from app.services.learners.train_model import predict_scores
from app.services.shared.logging_utils import log_simulation_debug
from app.services.synthdata.config.synthdata_config import GROUP_NAMES
from app.services.synthdata.core.dataset import Dataset


def _prevalence_by_group(ds: Dataset, labels: np.ndarray) -> Dict[str, Optional[float]]:
    result = {}
    for group in GROUP_NAMES:
        mask = ds.group_mask(group)
        result[group] = float(labels[mask].mean()) if mask.any() else None
    return result


def relabel_with_decisions(
    slice_ds: Dataset,
    decisions: np.ndarray,
    iteration: int,
    month: Optional[int] = None,
) -> Tuple[Dataset, LedgerEntry]:
    """
    判定結果で観測ラベルを書き換える

    陽性判定の行は観測ラベル1（口座凍結で真のラベルは判明しない）、
    陰性判定の行は真のラベルが判明する。真のラベルは変更しない。

    Args:
        slice_ds (Dataset): スコアリング対象のスライス
        decisions (np.ndarray): 0/1 の判定
        iteration (int): 反復番号
        month (Optional[int]): 記録する月（未指定ならスライスの先頭行の月）

    Returns:
        Tuple[Dataset, LedgerEntry]: 書き換え後のスライスと台帳エントリ
    """
    flagged = np.asarray(decisions) == 1
    observed = np.where(flagged, 1, slice_ds.true_labels).astype(np.int8)
    relabeled = slice_ds.evolve(observed_labels=observed)

    if month is None:
        month = int(slice_ds.months[0]) if slice_ds.n_instances else -1
    entry = LedgerEntry(
        iteration=iteration,
        month=month,
        relabeled_positive_ids=[int(i) for i in slice_ds.ids[flagged]],
        revealed_ids=[int(i) for i in slice_ds.ids[~flagged]],
        true_positive_count=int(slice_ds.true_labels.sum()),
        false_positive_count=int((flagged & (slice_ds.true_labels == 0)).sum()),
        observed_positive_count=int(observed.sum()),
        observed_prevalence=_prevalence_by_group(slice_ds, observed),
        true_prevalence=_prevalence_by_group(slice_ds, slice_ds.true_labels),
    )
    log_simulation_debug(
        "観測ラベルの書き換え",
        {"iteration": iteration, "month": month, "flagged": int(flagged.sum()), "fp": entry.false_positive_count},
    )
    return relabeled, entry


def relabel_with_predictions(
    slice_ds: Dataset,
    model: Model,
    fitted: FittedThresholds,
    iteration: int = 0,
    month: Optional[int] = None,
) -> Tuple[Dataset, LedgerEntry]:
    """
    モデルの予測で観測ラベルを書き換える

    Raises:
        FeatureLayoutMismatch: モデルとスライスの列構成が異なる
    """
    scores = predict_scores(model, slice_ds)
    groups = slice_ds.group_labels() if fitted.kind == PolicyKind.GROUPWISE else None
    decisions = apply_thresholds(scores, groups, fitted)
    return relabel_with_decisions(slice_ds, decisions, iteration, month)


def merge_observed_labels(ds: Dataset, mask: np.ndarray, relabeled: Dataset) -> Dataset:
    """mask の行（順序保存）の観測ラベルを relabeled の値で置き換える"""
    observed = ds.observed_labels.copy()
    observed[mask] = relabeled.observed_labels
    return ds.evolve(observed_labels=observed)

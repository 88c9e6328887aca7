"""
混同行列ベースの全体・グループ別指標と公平性指標
"""
import math
from typing import Optional

import numpy as np

from app.schemas.schemas import (
    ConfusionCounts,
    GroupConfusion,
    GroupRates,
    LabelSource,
    Log2Ratio,
    MetricsReport,
)
from app.services.decision.core.threshold_engine import fit_cutoff
from app.services.fairmetrics.config.fairmetrics_config import (
    BAND_EPSILON,
    PREDICTIVE_EQUALITY_BAND,
    RATIO_DENOMINATOR,
    RATIO_NUMERATOR,
)
from app.services.shared.exceptions import LengthMismatch
from app.services.synthdata.config.synthdata_config import GROUP_NAMES


def _counts(decisions: np.ndarray, labels: np.ndarray) -> ConfusionCounts:
    return ConfusionCounts(
        tp=int(((decisions == 1) & (labels == 1)).sum()),
        fp=int(((decisions == 1) & (labels == 0)).sum()),
        tn=int(((decisions == 0) & (labels == 0)).sum()),
        fn=int(((decisions == 0) & (labels == 1)).sum()),
    )


def confusion(decisions: np.ndarray, labels: np.ndarray, groups: np.ndarray) -> GroupConfusion:
    """
    全体とグループ別の TP/FP/TN/FN を数える

    グループ別の行は A, B の両方を常に含む（該当行が無ければ全て0）。

    Raises:
        LengthMismatch: 判定・ラベル・グループの長さが異なる
    """
    decisions = np.asarray(decisions)
    labels = np.asarray(labels)
    groups = np.asarray(groups).astype(str)
    if not (decisions.shape[0] == labels.shape[0] == groups.shape[0]):
        raise LengthMismatch(
            f"長さが一致しません (decisions={decisions.shape[0]}, labels={labels.shape[0]}, groups={groups.shape[0]})"
        )
    return GroupConfusion(
        overall=_counts(decisions, labels),
        by_group={g: _counts(decisions[groups == g], labels[groups == g]) for g in GROUP_NAMES},
    )


def _rate(numerator: int, denominator: int) -> Optional[float]:
    return numerator / denominator if denominator else None


def rates(counts: ConfusionCounts) -> GroupRates:
    return GroupRates(
        tpr=_rate(counts.tp, counts.positives),
        fpr=_rate(counts.fp, counts.negatives),
        fnr=_rate(counts.fn, counts.positives),
        precision=_rate(counts.tp, counts.tp + counts.fp),
    )


def log2_ratio(numerator: Optional[float], denominator: Optional[float]) -> Log2Ratio:
    """
    log2(numerator / denominator)

    どちらかが未定義、または片方だけが0なら未定義。両方0は等しい率として0。
    log2(a) - log2(b) で計算し、A/B の入れ替えで符号が厳密に反転する。
    """
    if numerator is None or denominator is None:
        return Log2Ratio(value=None, defined=False)
    if numerator == 0.0 and denominator == 0.0:
        return Log2Ratio(value=0.0, defined=True)
    if numerator == 0.0 or denominator == 0.0:
        return Log2Ratio(value=None, defined=False)
    return Log2Ratio(value=math.log2(numerator) - math.log2(denominator), defined=True)


def compute_metrics(conf: GroupConfusion, evaluated_against: LabelSource = LabelSource.TRUE_LABELS) -> MetricsReport:
    """
    混同行列から指標を計算

    Args:
        conf (GroupConfusion): 全体・グループ別の混同行列
        evaluated_against (LabelSource): 真のラベルと観測ラベルのどちらで数えたか

    Returns:
        MetricsReport: 率・log2比・予測平等性の判定
    """
    by_group = {g: rates(c) for g, c in conf.by_group.items()}
    numerator = by_group.get(RATIO_NUMERATOR, GroupRates())
    denominator = by_group.get(RATIO_DENOMINATOR, GroupRates())
    fpr_ratio = log2_ratio(numerator.fpr, denominator.fpr)
    return MetricsReport(
        evaluated_against=evaluated_against,
        overall=rates(conf.overall),
        by_group=by_group,
        counts=conf,
        log2_fpr_ratio=fpr_ratio,
        log2_fnr_ratio=log2_ratio(numerator.fnr, denominator.fnr),
        log2_precision_ratio=log2_ratio(numerator.precision, denominator.precision),
        predictive_equality_pass=fpr_ratio.defined and abs(fpr_ratio.value) <= PREDICTIVE_EQUALITY_BAND + BAND_EPSILON,
    )


def tpr_at_fpr(scores: np.ndarray, labels: np.ndarray, target_fpr: float) -> float:
    """
    同じ集合で全体閾値をフィッティングしたときのTPR

    正例が無い場合は 0.0 を返す。

    Raises:
        NoNegativesForFPR: 負例が無い
    """
    fit = fit_cutoff(scores, labels, target_fpr)
    return fit.tpr if fit.tpr is not None else 0.0

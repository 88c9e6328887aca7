"""
注入したバイアス条件の統計的検証エンジン
"""
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from app.schemas.schemas import BiasVerificationReport, Condition, ProvenanceEntry, VerificationEntry
from app.services.shared.exceptions import ProvenanceMismatch
from app.services.shared.logging_utils import log_simulation_debug
from app.services.synthdata.config.synthdata_config import (
    DEFAULT_ALPHA,
    GROUP_CODE_A,
    GROUP_CODE_B,
    GROUP_NAMES,
    RATIO_TOLERANCE,
)
from app.services.synthdata.core.dataset import Dataset
from app.services.synthdata.core.injection_engine import components_from_provenance


def _scope(ds: Dataset, months: Optional[Sequence[int]]) -> np.ndarray:
    if months is None:
        return np.ones(ds.n_instances, dtype=bool)
    return np.isin(ds.months, np.asarray(list(months), dtype=np.int64))


def two_proportion_ztest(k1: int, n1: int, k2: int, n2: int, ratio: float = 1.0) -> Tuple[float, float]:
    """
    H0: p1 = ratio * p2 の両側z検定

    ratio=1 のときはプールした分散、それ以外は非プール分散を使う。

    Returns:
        Tuple[float, float]: (z統計量, p値)
    """
    p1, p2 = k1 / n1, k2 / n2
    if ratio == 1.0:
        pooled = (k1 + k2) / (n1 + n2)
        variance = pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2)
    else:
        variance = p1 * (1.0 - p1) / n1 + ratio ** 2 * p2 * (1.0 - p2) / n2
    if variance <= 0.0:
        return 0.0, 1.0
    z = (p1 - ratio * p2) / math.sqrt(variance)
    return z, float(2.0 * stats.norm.sf(abs(z)))


def _ks_battery(samples: List[Tuple[np.ndarray, np.ndarray]], alpha: float) -> Tuple[float, float, bool]:
    """
    複数の2標本KS検定を Bonferroni 補正でまとめる

    Returns:
        Tuple[float, float, bool]: (最大統計量, 最小p値, 棄却したか)
    """
    statistics, p_values = [], []
    for left, right in samples:
        if left.size == 0 or right.size == 0:
            continue
        result = stats.ks_2samp(left, right)
        statistics.append(float(result.statistic))
        p_values.append(float(result.pvalue))
    if not p_values:
        return 0.0, 1.0, False
    min_p = min(p_values)
    return max(statistics), min_p, min_p < alpha / len(p_values)


def _verify_independence(ds: Dataset, entry: ProvenanceEntry, alpha: float) -> VerificationEntry:
    table = np.array([
        [int(((ds.groups == g) & (ds.true_labels == y)).sum()) for y in (0, 1)]
        for g in (GROUP_CODE_A, GROUP_CODE_B)
    ])
    share = float((ds.groups == GROUP_CODE_A).mean())
    if (table.sum(axis=1) == 0).any() or (table.sum(axis=0) == 0).any():
        # 片方のグループしか無い場合は独立性が自明に成り立つ
        return VerificationEntry(
            condition=entry.condition, test="chi2_contingency", statistic=0.0, p_value=1.0,
            rejected=False, passed=True, detail={"observed_share_A": share, "degenerate": True},
        )
    chi2, p_value, _, _ = stats.chi2_contingency(table)
    rejected = bool(p_value < alpha)
    return VerificationEntry(
        condition=entry.condition,
        test="chi2_contingency",
        statistic=float(chi2),
        p_value=float(p_value),
        rejected=rejected,
        passed=not rejected,
        detail={"observed_share_A": share, "declared_share_A": entry.params.get("group_share_A")},
    )


def _verify_prevalence(ds: Dataset, entry: ProvenanceEntry, alpha: float) -> VerificationEntry:
    c = float(entry.params["c"])
    scope = _scope(ds, entry.params.get("months"))
    in_a = scope & (ds.groups == GROUP_CODE_A)
    in_b = scope & (ds.groups == GROUP_CODE_B)
    n_a, n_b = int(in_a.sum()), int(in_b.sum())
    k_a, k_b = int(ds.true_labels[in_a].sum()), int(ds.true_labels[in_b].sum())
    if n_a == 0 or n_b == 0 or k_b == 0:
        raise ProvenanceMismatch("有病率格差の検証に必要なグループ・正例がありません")

    observed_ratio = (k_a / n_a) / (k_b / n_b)
    z, p_value = two_proportion_ztest(k_a, n_a, k_b, n_b)
    z_c, p_c = two_proportion_ztest(k_a, n_a, k_b, n_b, ratio=c)
    rejected = bool(p_value < alpha)
    within = abs(observed_ratio / c - 1.0) <= RATIO_TOLERANCE
    passed = within and (rejected if c != 1.0 else True)
    return VerificationEntry(
        condition=entry.condition,
        test="two_proportion_ztest",
        statistic=float(z),
        p_value=p_value,
        rejected=rejected,
        passed=passed,
        detail={
            "c": c,
            "observed_ratio": observed_ratio,
            "ratio_within_tolerance": within,
            "z_against_c": float(z_c),
            "p_against_c": p_c,
        },
    )


def _verify_class_conditional(ds: Dataset, entry: ProvenanceEntry, alpha: float) -> VerificationEntry:
    if ds.conditional_columns is None:
        raise ProvenanceMismatch("クラス条件付きバイアスが宣言されていますが x1, x2 がありません")
    components = components_from_provenance(ds)
    declared_biased = any(components[(label, "A")] != components[(label, "B")] for label in (0, 1))

    # シフト対象の月は分布が変わっているため除外する
    shift_entries = ds.provenance_entries(Condition.DYNAMIC_SHIFT)
    stable = np.ones(ds.n_instances, dtype=bool)
    if shift_entries:
        stable = ~np.isin(ds.months, np.asarray(shift_entries[-1].params["shift_months"], dtype=np.int64))

    samples = []
    for label in (0, 1):
        rows = stable & (ds.true_labels == label)
        for column in ds.conditional_columns:
            samples.append((
                ds.features[rows & (ds.groups == GROUP_CODE_A), column],
                ds.features[rows & (ds.groups == GROUP_CODE_B), column],
            ))
    statistic, p_value, rejected = _ks_battery(samples, alpha)
    return VerificationEntry(
        condition=entry.condition,
        test="ks_2samp_between_groups",
        statistic=statistic,
        p_value=p_value,
        rejected=rejected,
        passed=rejected == declared_biased,
        detail={"declared_biased": declared_biased, "n_tests": len(samples)},
    )


def _verify_noisy_labels(ds: Dataset, entry: ProvenanceEntry, noisy_entries: List[ProvenanceEntry]) -> VerificationEntry:
    flipped = set()
    for e in noisy_entries:
        flipped.update(int(i) for i in e.params.get("flipped_ids", []))
    mismatch = ds.observed_labels != ds.true_labels
    mismatch_ids = set(int(i) for i in ds.ids[mismatch])

    # 今回のエントリの反転が、宣言されたグループ・向きに限られているか監査する
    own_ids = np.asarray(entry.params.get("flipped_ids", []), dtype=np.int64)
    own_rows = np.isin(ds.ids, own_ids)
    affected_code = GROUP_CODE_A if entry.params["affected_group"] == GROUP_NAMES[0] else GROUP_CODE_B
    expected_observed = 1 if entry.params["mode"] == "inflate" else 0
    direction_ok = bool(
        np.all(ds.groups[own_rows] == affected_code)
        and np.all(ds.observed_labels[own_rows] == expected_observed)
        and np.all(ds.true_labels[own_rows] == 1 - expected_observed)
    )
    count_ok = int(own_rows.sum()) == int(entry.params["flips"])
    audit_ok = mismatch_ids == flipped
    return VerificationEntry(
        condition=entry.condition,
        test="label_count_audit",
        statistic=float(mismatch.sum()),
        p_value=None,
        rejected=None,
        passed=direction_ok and count_ok and audit_ok,
        detail={
            "declared_flips": int(entry.params["flips"]),
            "mismatched_rows": int(mismatch.sum()),
            "direction_ok": direction_ok,
            "achieved_ratio": entry.params.get("achieved_ratio"),
        },
    )


def _verify_dynamic_shift(ds: Dataset, entry: ProvenanceEntry, alpha: float) -> VerificationEntry:
    if ds.conditional_columns is None:
        raise ProvenanceMismatch("動的シフトが宣言されていますが x1, x2 がありません")
    shifted_months = np.asarray(entry.params["shift_months"], dtype=np.int64)
    in_shift = np.isin(ds.months, shifted_months)
    adapted_code = GROUP_CODE_A if entry.params["adapted_group"] == GROUP_NAMES[0] else GROUP_CODE_B

    def battery(group_code: int):
        samples = []
        for label in (0, 1):
            rows = (ds.groups == group_code) & (ds.true_labels == label)
            for column in ds.conditional_columns:
                samples.append((ds.features[rows & ~in_shift, column], ds.features[rows & in_shift, column]))
        return _ks_battery(samples, alpha)

    statistic, p_value, adapted_rejected = battery(adapted_code)
    _, other_p, other_rejected = battery(GROUP_CODE_B if adapted_code == GROUP_CODE_A else GROUP_CODE_A)
    return VerificationEntry(
        condition=entry.condition,
        test="ks_2samp_train_vs_shifted_months",
        statistic=statistic,
        p_value=p_value,
        rejected=adapted_rejected,
        passed=adapted_rejected and not other_rejected,
        detail={"other_group_rejected": other_rejected, "other_group_min_p": other_p},
    )


def verify_bias_conditions(ds: Dataset, alpha: float = DEFAULT_ALPHA) -> BiasVerificationReport:
    """
    来歴に宣言された各バイアス条件を統計的に検証

    Args:
        ds (Dataset): 検証するデータセット
        alpha (float): 有意水準

    Returns:
        BiasVerificationReport: 条件ごとの検定結果（来歴が無ければ空）

    Raises:
        ProvenanceMismatch: 宣言された条件に必要な列が無い
    """
    noisy_entries = ds.provenance_entries(Condition.NOISY_LABELS)
    entries: List[VerificationEntry] = []
    for entry in ds.provenance:
        if entry.condition == Condition.GROUP_INDEPENDENCE:
            entries.append(_verify_independence(ds, entry, alpha))
        elif entry.condition == Condition.PREVALENCE_DISPARITY:
            entries.append(_verify_prevalence(ds, entry, alpha))
        elif entry.condition == Condition.CLASS_CONDITIONAL:
            entries.append(_verify_class_conditional(ds, entry, alpha))
        elif entry.condition == Condition.NOISY_LABELS:
            entries.append(_verify_noisy_labels(ds, entry, noisy_entries))
        elif entry.condition == Condition.DYNAMIC_SHIFT:
            entries.append(_verify_dynamic_shift(ds, entry, alpha))

    log_simulation_debug("バイアス検証", {e.condition.value: e.passed for e in entries})
    return BiasVerificationReport(alpha=alpha, entries=entries)

"""
シナリオ1: 不正者の適応による分布シフト

同じ基本データから3つの世界を作り、同じ設定群を学習・評価します。
  - performance_ideal: x1, x2 のバイアスが学習・テスト期間で同一
  - adaptation: テスト期間だけ適応グループの x1, x2 が無情報になる
  - unbiased_baseline: x1, x2 を持たない
"""
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from app.schemas.schemas import (
    BaseDataConfig,
    BiasSpec,
    DynamicShiftSpec,
    LabelSource,
    ModelConfig,
    Scenario1Report,
    TrialResult,
    World,
    WorldResult,
)
from app.services.decision.core.threshold_engine import apply_thresholds, fit_global_threshold
from app.services.fairmetrics.core.metrics_engine import compute_metrics, confusion
from app.services.learners.train_model import train_and_score_trials
from app.services.scenarios.config.scenario_config import (
    STREAM_CONDITIONAL,
    STREAM_DATASET,
    STREAM_SHIFT,
    TOP_K,
    default_scenario1_bias,
    scenario1_test_months,
)
from app.services.shared.exceptions import InvalidScenarioConfig
from app.services.shared.logging_utils import log_simulation_info
from app.services.shared.seeding import derive_seed
from app.services.synthdata.build_dataset import apply_bias_spec, build_base_dataset
from app.services.synthdata.core.dataset import Dataset
from app.services.synthdata.core.injection_engine import apply_dynamic_shift, inject_class_conditional_bias


@dataclass(frozen=True, eq=False)
class Scenario1Worlds:
    """3つの世界のデータセット"""
    performance_ideal: Dataset
    adaptation: Dataset
    unbiased_baseline: Dataset
    train_months: List[int]
    test_months: List[int]
    shift_enabled: bool


def resolve_scenario1_bias(bias: Optional[BiasSpec], n_months: int) -> BiasSpec:
    """
    シナリオ1のバイアス設定を確定する

    未指定の x1, x2 成分・シフト設定は既定値で補う。

    Raises:
        InvalidScenarioConfig: グループサイズ・不正率が等しくない、またはノイズラベルが指定されている
    """
    default = default_scenario1_bias(n_months)
    if bias is None:
        return default
    if bias.group_share_A != 0.5 or bias.prevalence_multiplier_c != 1.0:
        raise InvalidScenarioConfig("シナリオ1ではグループサイズと不正率を等しくしてください (group_share_A=0.5, c=1)")
    if bias.noisy_labels is not None:
        raise InvalidScenarioConfig("シナリオ1ではノイズラベルは指定できません")
    return bias.model_copy(
        update={
            "cond_dist": bias.cond_dist if bias.cond_dist is not None else default.cond_dist,
            "dynamic_shift": bias.dynamic_shift if bias.dynamic_shift is not None else default.dynamic_shift,
        }
    )


def build_scenario1_worlds(base: BaseDataConfig, bias: BiasSpec, seed: int) -> Scenario1Worlds:
    """
    3つの世界を構築

    3つの世界は id・基本特徴量・ラベル・グループを共有し、追加列だけが異なる。
    """
    dataset_seed = derive_seed(seed, STREAM_DATASET)
    grouped = apply_bias_spec(
        build_base_dataset(base, dataset_seed),
        bias.model_copy(update={"cond_dist": None, "dynamic_shift": None}),
        dataset_seed,
    )
    ideal = inject_class_conditional_bias(grouped, bias.component_map(), derive_seed(seed, STREAM_CONDITIONAL))
    shift = bias.dynamic_shift or DynamicShiftSpec()
    adaptation = apply_dynamic_shift(ideal, shift, derive_seed(seed, STREAM_SHIFT))

    test_months = scenario1_test_months(base.n_months)
    train_months = [m for m in range(base.n_months) if m not in test_months]
    return Scenario1Worlds(
        performance_ideal=ideal,
        adaptation=adaptation,
        unbiased_baseline=grouped,
        train_months=train_months,
        test_months=test_months,
        shift_enabled=bool(shift.shift_months),
    )


def evaluate_trial(config_id: int, scores: np.ndarray, test: Dataset, target_fpr: float) -> TrialResult:
    """テスト集合自身で目標FPRの閾値を決め、TPRとFPR比を記録する"""
    fitted = fit_global_threshold(scores, test.true_labels, target_fpr)
    decisions = apply_thresholds(scores, None, fitted)
    report = compute_metrics(confusion(decisions, test.true_labels, test.group_labels()), LabelSource.TRUE_LABELS)
    return TrialResult(
        config_id=config_id,
        tpr=fitted.achieved_tpr if fitted.achieved_tpr is not None else 0.0,
        cutoff=fitted.global_cutoff,
        log2_fpr_ratio=report.log2_fpr_ratio,
        group_fpr={g: r.fpr for g, r in report.by_group.items()},
        group_tpr={g: r.tpr for g, r in report.by_group.items()},
    )


def top_ids(trials: Sequence[TrialResult], k: int = TOP_K) -> List[int]:
    """TPR 降順（同値は config_id 昇順）の上位 k 件"""
    ranked = sorted(trials, key=lambda t: (-t.tpr, t.config_id))
    return [t.config_id for t in ranked[:k]]


class Scenario1Engine:
    """シナリオ1を1シード分実行する"""

    def __init__(self, base: BaseDataConfig, bias: Optional[BiasSpec], target_fpr: float):
        self.base = base
        self.bias = resolve_scenario1_bias(bias, base.n_months)
        self.target_fpr = target_fpr

    def run(self, configs: Sequence[ModelConfig], seed: int) -> Scenario1Report:
        """
        各世界で試行を学習・評価

        adaptation のモデルは performance_ideal と同一（同じ学習データで学習済み）で、
        テスト集合だけが異なる。

        Args:
            configs (Sequence[ModelConfig]): 試行する設定
            seed (int): 乱数シード

        Returns:
            Scenario1Report: 世界ごとの試行結果
        """
        worlds = build_scenario1_worlds(self.base, self.bias, seed)
        log_simulation_info(
            f"シナリオ1 (seed={seed}): 学習月 {worlds.train_months}, テスト月 {worlds.test_months}, "
            f"シフト {'あり' if worlds.shift_enabled else 'なし'}"
        )

        ideal_train = worlds.performance_ideal.months_subset(worlds.train_months)
        ideal_test = worlds.performance_ideal.months_subset(worlds.test_months)
        adaptation_test = worlds.adaptation.months_subset(worlds.test_months)
        ideal_trials = train_and_score_trials(configs, ideal_train, [ideal_test, adaptation_test])

        baseline_train = worlds.unbiased_baseline.months_subset(worlds.train_months)
        baseline_test = worlds.unbiased_baseline.months_subset(worlds.test_months)
        baseline_trials = train_and_score_trials(configs, baseline_train, [baseline_test])

        results: Dict[str, List[TrialResult]] = {
            World.PERFORMANCE_IDEAL.value: [
                evaluate_trial(t.config.config_id, t.scores[0], ideal_test, self.target_fpr) for t in ideal_trials
            ],
            World.ADAPTATION.value: [
                evaluate_trial(t.config.config_id, t.scores[1], adaptation_test, self.target_fpr) for t in ideal_trials
            ],
            World.UNBIASED_BASELINE.value: [
                evaluate_trial(t.config.config_id, t.scores[0], baseline_test, self.target_fpr)
                for t in baseline_trials
            ],
        }
        world_results = {
            name: WorldResult(world=World(name), trials=trials, top_ids=top_ids(trials))
            for name, trials in results.items()
        }
        return Scenario1Report(
            seed=seed,
            shift_enabled=worlds.shift_enabled,
            target_fpr=self.target_fpr,
            configs=list(configs),
            worlds=world_results,
            believed_top_ids=world_results[World.PERFORMANCE_IDEAL.value].top_ids,
        )

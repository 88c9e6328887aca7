"""
シナリオ2: 選択的ラベルによるノイズの蓄積

学習3か月・検証1か月・テスト1か月のスライディングウィンドウを4回進める。
各反復のモデルがテスト月の観測ラベルを書き換え、その月は次の反復の検証、
さらに次の反復以降の学習に使われるため、ノイズが蓄積していく。
"""
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from app.schemas.schemas import (
    BaseDataConfig,
    BiasSpec,
    FeedbackLedger,
    FittedThresholds,
    IterationRecord,
    LabelSource,
    LedgerEntry,
    ModelConfig,
    PolicyKind,
    Scenario2Report,
    ThresholdPolicy,
)
from app.services.decision.core.threshold_engine import apply_thresholds
from app.services.decision.fit_thresholds import fit_thresholds
from app.services.fairmetrics.core.metrics_engine import compute_metrics, confusion, tpr_at_fpr
from app.services.learners.core.model import Model
from app.services.learners.train_model import train_and_score_trials
from app.services.scenarios.config.scenario_config import (
    INITIAL_TRAIN_MONTHS,
    MIN_SCENARIO2_MONTHS,
    N_ITERATIONS,
    OVERRIDE_CONFIG_ID,
    STREAM_DATASET,
    default_scenario2_bias,
)
from app.services.scenarios.core.feedback import merge_observed_labels, relabel_with_decisions
from app.services.shared.exceptions import InsufficientTimeline
from app.services.shared.logging_utils import log_simulation_info
from app.services.shared.seeding import derive_seed
from app.services.synthdata.build_dataset import build_biased_dataset
from app.services.synthdata.core.dataset import Dataset

# データセットを受け取りスコアを返す関数（学習の代わりに使う）
Scorer = Callable[[Dataset], np.ndarray]


@dataclass(frozen=True)
class IterationWindow:
    iteration: int
    train_months: List[int]
    validation_month: int
    test_month: int


def sliding_windows(n_months: int, drop_old: bool) -> List[IterationWindow]:
    """
    各反復の学習・検証・テスト月を決める

    drop_old なら学習期間は常に直近3か月、そうでなければ月0から累積する。

    Raises:
        InsufficientTimeline: 月数が足りない
    """
    if n_months < MIN_SCENARIO2_MONTHS:
        raise InsufficientTimeline(f"シナリオ2には {MIN_SCENARIO2_MONTHS} か月以上必要です (M={n_months})")
    windows = []
    for t in range(N_ITERATIONS):
        last_train = INITIAL_TRAIN_MONTHS - 1 + t
        first_train = t if drop_old else 0
        windows.append(
            IterationWindow(
                iteration=t,
                train_months=list(range(first_train, last_train + 1)),
                validation_month=last_train + 1,
                test_month=last_train + 2,
            )
        )
    return windows


@dataclass(frozen=True, eq=False)
class Scenario2Run:
    """シナリオ2の実行結果（レポートと、チェックポイント用の選択モデル・最終データ）"""
    report: Scenario2Report
    selected_models: Tuple[Optional[Model], ...]
    initial_dataset: Dataset
    final_dataset: Dataset


@dataclass
class _Selection:
    config_id: int
    model: Optional[Model]
    validation_scores: np.ndarray
    test_scores: np.ndarray
    selection_tpr: float


class Scenario2Engine:
    """シナリオ2を1シード分実行する"""

    def __init__(
        self,
        base: BaseDataConfig,
        bias: Optional[BiasSpec],
        policy: ThresholdPolicy,
        drop_old: bool = False,
        scorer_override: Optional[Scorer] = None,
    ):
        self.base = base
        self.bias = bias if bias is not None else default_scenario2_bias()
        self.policy = policy
        self.drop_old = drop_old
        self.scorer_override = scorer_override
        self.windows = sliding_windows(base.n_months, drop_old)

    def _select(
        self,
        configs: Sequence[ModelConfig],
        train: Dataset,
        validation: Dataset,
        test: Dataset,
    ) -> _Selection:
        """検証集合の観測ラベルで TPR@目標FPR が最大の試行を選ぶ（同値は config_id 昇順）"""
        target = self.policy.target_fpr
        if self.scorer_override is not None:
            val_scores = self.scorer_override(validation)
            return _Selection(
                config_id=OVERRIDE_CONFIG_ID,
                model=None,
                validation_scores=val_scores,
                test_scores=self.scorer_override(test),
                selection_tpr=tpr_at_fpr(val_scores, validation.observed_labels, target),
            )

        trials = train_and_score_trials(configs, train, [validation, test])
        best = None
        best_tpr = -1.0
        for trial in trials:
            tpr = tpr_at_fpr(trial.scores[0], validation.observed_labels, target)
            if tpr > best_tpr:
                best, best_tpr = trial, tpr
        return _Selection(
            config_id=best.config.config_id,
            model=best.model,
            validation_scores=best.scores[0],
            test_scores=best.scores[1],
            selection_tpr=best_tpr,
        )

    def _groups_for(self, ds: Dataset) -> Optional[np.ndarray]:
        return ds.group_labels() if self.policy.kind == PolicyKind.GROUPWISE else None

    def run(self, configs: Sequence[ModelConfig], seed: int) -> Scenario2Run:
        """
        スライディングウィンドウの全反復を実行

        Args:
            configs (Sequence[ModelConfig]): 各反復で試行する設定
            seed (int): 乱数シード

        Returns:
            Scenario2Run: レポート・選択モデル・最終データセット
        """
        dataset = build_biased_dataset(self.base, self.bias, derive_seed(seed, STREAM_DATASET))
        initial = dataset
        iterations: List[IterationRecord] = []
        ledger: List[LedgerEntry] = []
        models: List[Optional[Model]] = []

        for window in self.windows:
            train = dataset.months_subset(window.train_months)
            validation = dataset.months_subset([window.validation_month])
            test_mask = dataset.months == window.test_month
            test = dataset.subset(test_mask)

            selection = self._select(configs, train, validation, test)
            fitted: FittedThresholds = fit_thresholds(
                self.policy, selection.validation_scores, validation.observed_labels, self._groups_for(validation)
            )

            val_decisions = apply_thresholds(selection.validation_scores, self._groups_for(validation), fitted)
            test_decisions = apply_thresholds(selection.test_scores, self._groups_for(test), fitted)
            perceived = compute_metrics(
                confusion(val_decisions, validation.observed_labels, validation.group_labels()),
                LabelSource.OBSERVED_LABELS,
            )
            real = compute_metrics(
                confusion(test_decisions, test.true_labels, test.group_labels()),
                LabelSource.TRUE_LABELS,
            )
            iterations.append(
                IterationRecord(
                    iteration=window.iteration,
                    train_months=window.train_months,
                    validation_month=window.validation_month,
                    test_month=window.test_month,
                    chosen_config_id=selection.config_id,
                    validation_selection_tpr=selection.selection_tpr,
                    thresholds=fitted,
                    perceived=perceived,
                    real=real,
                    perceived_group_fpr={g: r.fpr for g, r in perceived.by_group.items()},
                    real_group_fpr={g: r.fpr for g, r in real.by_group.items()},
                    perceived_tpr=perceived.overall.tpr,
                    real_tpr=real.overall.tpr,
                )
            )
            models.append(selection.model)

            # テスト月はこの反復のモデルの判定で観測ラベルが決まり、次の検証集合になる
            relabeled, entry = relabel_with_decisions(test, test_decisions, window.iteration, window.test_month)
            dataset = merge_observed_labels(dataset, test_mask, relabeled)
            ledger.append(entry)

            log_simulation_info(
                f"シナリオ2 (seed={seed}) 反復 {window.iteration}: config={selection.config_id}, "
                f"perceived FPR={perceived.overall.fpr}, real FPR={real.overall.fpr}, "
                f"ノイズ {entry.false_positive_count} 件"
            )

        report = Scenario2Report(
            seed=seed,
            policy=self.policy,
            drop_old=self.drop_old,
            iterations=iterations,
            ledger=FeedbackLedger(entries=ledger),
        )
        return Scenario2Run(
            report=report,
            selected_models=tuple(models),
            initial_dataset=initial,
            final_dataset=dataset,
        )

"""
モデル学習・スコアリングサービス

シナリオから呼ばれる学習・推論の入口です。アルゴリズムごとのエンジンに
処理を振り分け、特徴量レイアウトの整合性を保証します。
"""
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from app.schemas.schemas import Algorithm, ModelConfig
from app.services.learners.core.feature_layout import FeatureLayout
from app.services.learners.core.gbdt_engine import GradientBoostingEngine, predict_gbdt
from app.services.learners.core.logreg_engine import LogisticRegressionEngine, predict_logreg
from app.services.learners.core.model import Model
from app.services.shared.exceptions import DegenerateLabels, LearnerError, PerfloopError
from app.services.shared.logging_utils import log_simulation_info
from app.services.synthdata.core.dataset import Dataset


def _training_inputs(train: Dataset, config: ModelConfig) -> Tuple[np.ndarray, np.ndarray, FeatureLayout]:
    if train.n_instances == 0:
        raise DegenerateLabels("学習データが空です")
    labels = train.observed_labels
    if labels.min() == labels.max():
        raise DegenerateLabels(f"観測ラベルが単一クラス ({int(labels[0])}) のみです")
    layout = FeatureLayout.for_dataset(train, config.awareness)
    return layout.matrix(train), labels, layout


def train_logreg(train: Dataset, config: ModelConfig) -> Model:
    """
    ロジスティック回帰を観測ラベルで学習

    Raises:
        DegenerateLabels: 観測ラベルが単一クラス
        DivergedTraining: 学習が発散した
    """
    x, y, layout = _training_inputs(train, config)
    return LogisticRegressionEngine(config).fit(x, y, layout)


def train_gbdt(train: Dataset, config: ModelConfig) -> Model:
    """
    GBDT を観測ラベルで学習

    Raises:
        DegenerateLabels: 観測ラベルが単一クラス
        DegenerateSplitConfig: min_leaf が学習データ件数を超える
    """
    x, y, layout = _training_inputs(train, config)
    return GradientBoostingEngine(config).fit(x, y, layout)


def train_model(train: Dataset, config: ModelConfig) -> Model:
    if config.algorithm == Algorithm.LOGREG:
        return train_logreg(train, config)
    return train_gbdt(train, config)


def predict_scores(model: Model, ds: Dataset) -> np.ndarray:
    """
    データセットの各行のスコア（[0,1]）を計算

    Raises:
        FeatureLayoutMismatch: 特徴量の列構成が学習時と異なる
    """
    x = model.layout.matrix(ds)
    if model.algorithm == Algorithm.LOGREG:
        return predict_logreg(model, x)
    return predict_gbdt(model, x)


@dataclass(frozen=True, eq=False)
class TrialScores:
    """1試行の学習済みモデルと、評価集合ごとのスコア"""
    config: ModelConfig
    model: Model
    scores: Tuple[np.ndarray, ...]


def train_and_score_trials(
    configs: Sequence[ModelConfig],
    train: Dataset,
    score_sets: Sequence[Dataset],
) -> List[TrialScores]:
    """
    各設定でモデルを学習し、指定した集合をスコアリング

    試行は config の順に逐次実行する。

    Args:
        configs (Sequence[ModelConfig]): 試行する設定
        train (Dataset): 学習データ
        score_sets (Sequence[Dataset]): スコアリング対象の集合

    Returns:
        List[TrialScores]: configs と同じ順の結果

    Raises:
        LearnerError: 学習・推論に失敗した場合
    """
    try:
        log_simulation_info(f"{len(configs)} 試行の学習を開始 (学習データ {train.n_instances} 行)")
        results = []
        for config in configs:
            model = train_model(train, config)
            scores = tuple(predict_scores(model, ds) for ds in score_sets)
            results.append(TrialScores(config=config, model=model, scores=scores))
        return results
    except PerfloopError:
        raise
    except Exception as e:
        raise LearnerError(f"試行の学習中にエラーが発生しました: {e}") from e

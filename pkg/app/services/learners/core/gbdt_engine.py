"""
勾配ブースティング決定木（ロジスティック損失、Newton 葉）
"""
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import expit

from app.schemas.schemas import Algorithm, ModelConfig
from app.services.learners.config.learners_config import (
    HESSIAN_EPSILON,
    MAX_STEP_HALVINGS,
    MIN_SPLIT_GAIN,
)
from app.services.learners.core.feature_layout import FeatureLayout
from app.services.learners.core.model import Model, RegressionTree
from app.services.shared.exceptions import DegenerateSplitConfig, DivergedTraining
from app.services.shared.logging_utils import log_simulation_debug


def mean_log_loss(y: np.ndarray, margin: np.ndarray) -> float:
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))


@dataclass(frozen=True)
class SplitCandidate:
    feature: int
    threshold: float
    gain: float


def presort_columns(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    特徴量ごとの昇順の行番号と、同値を含む特徴量のマスクを返す

    Returns:
        Tuple[np.ndarray, np.ndarray]: 行番号 (d, n)、同値を含むか (d,)
    """
    order = np.argsort(x, axis=0, kind="stable")
    sorted_values = np.take_along_axis(x, order, axis=0)
    tied = np.any(sorted_values[1:] == sorted_values[:-1], axis=0)
    return np.ascontiguousarray(order.T), tied


def best_split(
    x: np.ndarray,
    target: np.ndarray,
    order: np.ndarray,
    tied: np.ndarray,
    min_leaf: int,
) -> Optional[SplitCandidate]:
    """
    分散減少が最大の分割を全探索

    閾値は隣接する異なる特徴量値の中点。ゲインが等しい場合は
    特徴量番号・閾値が小さい方を選ぶ。

    Args:
        x (np.ndarray): 入力行列
        target (np.ndarray): 回帰対象（負の勾配）
        order (np.ndarray): 節点の行を特徴量ごとに昇順に並べた行番号 (d, m)
        tied (np.ndarray): 同値を含む特徴量のマスク (d,)
        min_leaf (int): 葉の最小行数

    Returns:
        Optional[SplitCandidate]: 分割（見つからなければ None）
    """
    d, m = order.shape
    if m < 2 * min_leaf:
        return None
    total = float(target[order[0]].sum())

    # 左側の件数 min_leaf..m-min_leaf の境界だけを評価する
    lo, hi = min_leaf - 1, m - min_leaf
    left_n = np.arange(min_leaf, m - min_leaf + 1, dtype=np.float64)
    inv_left = 1.0 / left_n
    inv_right = 1.0 / (m - left_n)
    left_sum = np.cumsum(target[order], axis=1)[:, lo:hi]
    score = left_sum * left_sum
    score *= inv_left
    right_sum = total - left_sum
    right_sum *= right_sum
    right_sum *= inv_right
    score += right_sum
    for j in np.flatnonzero(tied):
        xs = x[order[j], j]
        score[j, xs[lo + 1:hi + 1] == xs[lo:hi]] = -np.inf

    position = np.argmax(score, axis=1)
    per_feature = score[np.arange(d), position]
    j = int(np.argmax(per_feature))
    gain = float(per_feature[j]) - total * total / m
    if not gain > MIN_SPLIT_GAIN:
        return None
    k = lo + int(position[j])
    a, b = x[order[j, k], j], x[order[j, k + 1], j]
    return SplitCandidate(feature=j, threshold=float((a + b) / 2.0), gain=gain)


def partition(order: np.ndarray, goes_right: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """各特徴量の並びを保ったまま節点の行番号を左右の子に分ける"""
    d = order.shape[0]
    mask = goes_right[order]
    return order[~mask].reshape(d, -1), order[mask].reshape(d, -1)


class GradientBoostingEngine:
    """深さ制限付き回帰木をロジスティック損失の勾配でブースティングする"""

    def __init__(self, config: ModelConfig):
        self.config = config
        self.rounds = int(config.hyperparams["rounds"])
        self.max_depth = int(config.hyperparams["max_depth"])
        self.learning_rate = float(config.hyperparams["learning_rate"])
        self.min_leaf = int(config.hyperparams["min_leaf"])

    def _grow_tree(
        self,
        x: np.ndarray,
        gradient: np.ndarray,
        hessian: np.ndarray,
        order: np.ndarray,
        tied: np.ndarray,
    ) -> Tuple[RegressionTree, np.ndarray]:
        """1本の木を成長させ、木と学習行ごとの出力値を返す"""
        feature: List[int] = []
        threshold: List[float] = []
        left: List[int] = []
        right: List[int] = []
        value: List[float] = []
        leaf_of_row = np.zeros(x.shape[0], dtype=np.int64)
        goes_right = np.zeros(x.shape[0], dtype=bool)

        def add_node() -> int:
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(0.0)
            return len(value) - 1

        frontier = [(add_node(), order, 0)]
        while frontier:
            node, node_order, depth = frontier.pop(0)
            split = (
                best_split(x, gradient, node_order, tied, self.min_leaf) if depth < self.max_depth else None
            )
            rows = node_order[0]
            if split is None:
                value[node] = float(gradient[rows].sum() / (hessian[rows].sum() + HESSIAN_EPSILON))
                leaf_of_row[rows] = node
                continue
            to_right = x[rows, split.feature] >= split.threshold
            if depth + 1 < self.max_depth:
                goes_right[rows[to_right]] = True
                left_order, right_order = partition(node_order, goes_right)
                goes_right[rows[to_right]] = False
            else:
                # 子は葉になるので行の集合だけを渡す
                left_order, right_order = rows[~to_right][None, :], rows[to_right][None, :]

            left_id, right_id = add_node(), add_node()
            feature[node], threshold[node] = split.feature, split.threshold
            left[node], right[node] = left_id, right_id
            frontier.append((left_id, left_order, depth + 1))
            frontier.append((right_id, right_order, depth + 1))

        tree = RegressionTree(
            feature=np.asarray(feature, dtype=np.int64),
            threshold=np.asarray(threshold, dtype=np.float64),
            left=np.asarray(left, dtype=np.int64),
            right=np.asarray(right, dtype=np.int64),
            value=np.asarray(value, dtype=np.float64),
        )
        return tree, tree.value[leaf_of_row]

    def fit(self, x: np.ndarray, y: np.ndarray, layout: FeatureLayout) -> Model:
        """
        学習を実行

        初期スコアは観測有病率の対数オッズ。各ラウンドで損失が増える場合は
        木の出力を半減させ、損失の単調非増加を保つ。

        Args:
            x (np.ndarray): 入力行列
            y (np.ndarray): 観測ラベル (0/1)
            layout (FeatureLayout): 入力の列構成

        Returns:
            Model: 学習済みモデル（loss_trace は初期値を含めて rounds+1 件）

        Raises:
            DegenerateSplitConfig: min_leaf が行数を超える
            DivergedTraining: 損失が非有限値になった
        """
        n = x.shape[0]
        if self.min_leaf > n:
            raise DegenerateSplitConfig(f"min_leaf={self.min_leaf} が学習データ件数 {n} を超えています")

        y = y.astype(np.float64)
        prevalence = float(y.mean())
        base_score = float(np.log(prevalence / (1.0 - prevalence)))
        margin = np.full(n, base_score)
        loss = mean_log_loss(y, margin)
        trace = [loss]
        trees: List[RegressionTree] = []

        order, tied = presort_columns(x)
        for _ in range(self.rounds):
            prob = expit(margin)
            gradient = y - prob
            hessian = prob * (1.0 - prob)
            tree, row_values = self._grow_tree(x, gradient, hessian, order, tied)

            step = self.learning_rate
            candidate_loss = mean_log_loss(y, margin + step * row_values)
            halvings = 0
            while candidate_loss > loss and halvings < MAX_STEP_HALVINGS:
                step /= 2.0
                halvings += 1
                candidate_loss = mean_log_loss(y, margin + step * row_values)
            if candidate_loss > loss:
                step = 0.0
                candidate_loss = loss
            if not np.isfinite(candidate_loss):
                raise DivergedTraining("ブースティング中に損失が非有限値になりました")

            scaled = tree.scaled(step)
            trees.append(scaled)
            margin = margin + step * row_values
            loss = candidate_loss
            trace.append(loss)

        log_simulation_debug(
            "GBDTの学習完了",
            {"config_id": self.config.config_id, "rounds": self.rounds, "loss": round(loss, 6)},
        )
        return Model(
            algorithm=Algorithm.GBDT,
            layout=layout,
            config_id=self.config.config_id,
            hyperparams=dict(self.config.hyperparams),
            base_score=base_score,
            trees=tuple(trees),
            final_loss=loss,
            iterations=self.rounds,
            loss_trace=tuple(trace),
        )


def predict_gbdt(model: Model, x: np.ndarray) -> np.ndarray:
    margin = np.full(x.shape[0], model.base_score)
    for tree in model.trees:
        margin += tree.predict(x)
    return expit(margin)

"""
学習済みモデルの値オブジェクト
"""
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from app.schemas.schemas import Algorithm
from app.services.learners.core.feature_layout import FeatureLayout


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """
    配列表現の回帰木

    node i が内部節点なら x[feature[i]] >= threshold[i] で right[i]、
    それ以外で left[i] に進む。葉は left[i] == -1 で、value[i] が出力値。
    """
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def __post_init__(self):
        for name in ("feature", "threshold", "left", "right", "value"):
            array = np.array(getattr(self, name), copy=True)
            array.setflags(write=False)
            object.__setattr__(self, name, array)

    @property
    def n_nodes(self) -> int:
        return int(self.value.shape[0])

    @property
    def depth(self) -> int:
        depths = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.left[i] >= 0:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max()) if self.n_nodes else 0

    def predict(self, x: np.ndarray) -> np.ndarray:
        node = np.zeros(x.shape[0], dtype=np.int64)
        rows = np.arange(x.shape[0])
        for _ in range(self.depth):
            internal = self.left[node] >= 0
            if not internal.any():
                break
            go_right = x[rows, np.maximum(self.feature[node], 0)] >= self.threshold[node]
            next_node = np.where(go_right, self.right[node], self.left[node])
            node = np.where(internal, next_node, node)
        return self.value[node]

    def scaled(self, factor: float) -> "RegressionTree":
        return RegressionTree(self.feature, self.threshold, self.left, self.right, self.value * factor)


@dataclass(frozen=True, eq=False)
class Model:
    """
    学習済みスコアリングモデル

    logreg は weights と intercept、gbdt は base_score と trees を持つ。
    スコアはすべて [0, 1] の確率。
    """
    algorithm: Algorithm
    layout: FeatureLayout
    config_id: int = 0
    hyperparams: dict = field(default_factory=dict)
    weights: Optional[np.ndarray] = None
    intercept: float = 0.0
    base_score: float = 0.0
    trees: Tuple[RegressionTree, ...] = ()
    final_loss: float = float("nan")
    iterations: int = 0
    loss_trace: Tuple[float, ...] = ()

    def __post_init__(self):
        if self.weights is not None:
            weights = np.array(self.weights, dtype=np.float64, copy=True)
            weights.setflags(write=False)
            object.__setattr__(self, "weights", weights)

    @property
    def awareness(self) -> bool:
        return self.layout.awareness

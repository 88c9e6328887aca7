"""
L2正則化ロジスティック回帰（全バッチ勾配降下）
"""
from typing import Tuple

import numpy as np
from scipy.special import expit

from app.schemas.schemas import Algorithm, ModelConfig
from app.services.learners.core.feature_layout import FeatureLayout
from app.services.learners.core.model import Model
from app.services.shared.exceptions import DivergedTraining
from app.services.shared.logging_utils import log_simulation_debug


def logistic_loss(weights: np.ndarray, intercept: float, x: np.ndarray, y: np.ndarray, l2: float) -> float:
    """平均ロジスティック損失 + (l2/2)·||w||²（切片は正則化しない）"""
    margin = x @ weights + intercept
    data_loss = np.mean(np.logaddexp(0.0, margin) - y * margin)
    return float(data_loss + 0.5 * l2 * np.dot(weights, weights))


def logistic_gradient(
    weights: np.ndarray,
    intercept: float,
    x: np.ndarray,
    y: np.ndarray,
    l2: float,
) -> Tuple[np.ndarray, float]:
    """logistic_loss の解析的勾配 (重み, 切片)"""
    residual = expit(x @ weights + intercept) - y
    grad_w = x.T @ residual / x.shape[0] + l2 * weights
    grad_b = float(np.mean(residual))
    return grad_w, grad_b


class LogisticRegressionEngine:
    """ゼロ初期化から固定反復回数だけ勾配降下する"""

    def __init__(self, config: ModelConfig):
        self.config = config
        self.learning_rate = float(config.hyperparams["learning_rate"])
        self.l2 = float(config.hyperparams["l2"])
        self.max_iters = int(config.hyperparams["max_iters"])

    def fit(self, x: np.ndarray, y: np.ndarray, layout: FeatureLayout) -> Model:
        """
        学習を実行

        Args:
            x (np.ndarray): 入力行列
            y (np.ndarray): 観測ラベル (0/1)
            layout (FeatureLayout): 入力の列構成

        Returns:
            Model: 学習済みモデル

        Raises:
            DivergedTraining: 損失・重みが非有限値になった
        """
        y = y.astype(np.float64)
        weights = np.zeros(x.shape[1], dtype=np.float64)
        intercept = 0.0

        for _ in range(self.max_iters):
            grad_w, grad_b = logistic_gradient(weights, intercept, x, y, self.l2)
            weights = weights - self.learning_rate * grad_w
            intercept = intercept - self.learning_rate * grad_b
            if not (np.all(np.isfinite(weights)) and np.isfinite(intercept)):
                raise DivergedTraining(f"重みが発散しました (learning_rate={self.learning_rate})")

        loss = logistic_loss(weights, intercept, x, y, self.l2)
        if not np.isfinite(loss):
            raise DivergedTraining(f"損失が非有限値になりました (learning_rate={self.learning_rate})")

        log_simulation_debug("ロジスティック回帰の学習完了", {"config_id": self.config.config_id, "loss": round(loss, 6)})
        return Model(
            algorithm=Algorithm.LOGREG,
            layout=layout,
            config_id=self.config.config_id,
            hyperparams=dict(self.config.hyperparams),
            weights=weights,
            intercept=float(intercept),
            final_loss=loss,
            iterations=self.max_iters,
        )


def predict_logreg(model: Model, x: np.ndarray) -> np.ndarray:
    return expit(x @ model.weights + model.intercept)

"""
モデルの自己記述的なJSON表現
"""
import json

import numpy as np

from app.schemas.schemas import Algorithm
from app.services.learners.core.feature_layout import FeatureLayout
from app.services.learners.core.model import Model, RegressionTree

FORMAT_TAG = "perfloop-model/1"


def _tree_to_dict(tree: RegressionTree) -> dict:
    return {
        "feature": tree.feature.tolist(),
        "threshold": tree.threshold.tolist(),
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "value": tree.value.tolist(),
    }


def _tree_from_dict(data: dict) -> RegressionTree:
    return RegressionTree(
        feature=np.asarray(data["feature"], dtype=np.int64),
        threshold=np.asarray(data["threshold"], dtype=np.float64),
        left=np.asarray(data["left"], dtype=np.int64),
        right=np.asarray(data["right"], dtype=np.int64),
        value=np.asarray(data["value"], dtype=np.float64),
    )


def model_to_dict(model: Model) -> dict:
    data = {
        "format": FORMAT_TAG,
        "algorithm": model.algorithm.value,
        "layout": model.layout.to_dict(),
        "config_id": model.config_id,
        "hyperparams": model.hyperparams,
        "training": {
            "final_loss": model.final_loss,
            "iterations": model.iterations,
            "loss_trace": list(model.loss_trace),
        },
    }
    if model.algorithm == Algorithm.LOGREG:
        data["parameters"] = {"weights": model.weights.tolist(), "intercept": model.intercept}
    else:
        data["parameters"] = {"base_score": model.base_score, "trees": [_tree_to_dict(t) for t in model.trees]}
    return data


def model_to_json(model: Model) -> str:
    """モデルをJSON文字列に変換（float は repr で完全に往復する）"""
    return json.dumps(model_to_dict(model), sort_keys=True, indent=1) + "\n"


def model_from_json(text: str) -> Model:
    """
    model_to_json の出力からモデルを復元

    Raises:
        ValueError: 形式タグが一致しない
    """
    data = json.loads(text)
    if data.get("format") != FORMAT_TAG:
        raise ValueError(f"未対応のモデル形式です: {data.get('format')}")
    algorithm = Algorithm(data["algorithm"])
    params = data["parameters"]
    training = data["training"]
    common = dict(
        algorithm=algorithm,
        layout=FeatureLayout.from_dict(data["layout"]),
        config_id=int(data["config_id"]),
        hyperparams=data["hyperparams"],
        final_loss=float(training["final_loss"]),
        iterations=int(training["iterations"]),
        loss_trace=tuple(training["loss_trace"]),
    )
    if algorithm == Algorithm.LOGREG:
        return Model(weights=np.asarray(params["weights"], dtype=np.float64), intercept=float(params["intercept"]), **common)
    return Model(
        base_score=float(params["base_score"]),
        trees=tuple(_tree_from_dict(t) for t in params["trees"]),
        **common,
    )

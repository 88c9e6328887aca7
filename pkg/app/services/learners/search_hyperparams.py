"""
ハイパーパラメータ探索サービス
"""
from typing import List, Optional

from app.schemas.schemas import Algorithm, HyperparamSpace, ModelConfig
from app.services.learners.core.hyperparam_engine import default_space, sample_hyperparams
from app.services.shared.logging_utils import log_simulation_debug


def build_trial_configs(
    space: Optional[HyperparamSpace],
    algorithm: Algorithm,
    awareness: bool,
    n_trials: int,
    seed: int,
) -> List[ModelConfig]:
    """
    試行する設定のリストを作成

    Args:
        space (Optional[HyperparamSpace]): 探索空間（None なら algorithm の既定空間）
        algorithm (Algorithm): 既定空間を使う場合のアルゴリズム
        awareness (bool): 既定空間を使う場合の awareness
        n_trials (int): 試行数
        seed (int): 乱数シード

    Returns:
        List[ModelConfig]: サンプリングした設定
    """
    if space is None:
        space = default_space(algorithm, awareness)
    configs = sample_hyperparams(space, n_trials, seed)
    log_simulation_debug("試行設定のサンプリング", {"algorithm": space.algorithm.value, "n_trials": n_trials})
    return configs

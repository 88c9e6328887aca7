"""
ハイパーパラメータのランダムサーチ
"""
import math
from typing import Dict, List

from app.schemas.schemas import Algorithm, HyperparamSpace, ModelConfig, ParamRange
from app.services.learners.config.learners_config import DEFAULT_GBDT_SPACE, DEFAULT_LOGREG_SPACE
from app.services.shared.exceptions import EmptySpace, LearnerError
from app.services.shared.seeding import make_rng


def default_space(algorithm: Algorithm, awareness: bool = False) -> HyperparamSpace:
    """アルゴリズムごとの既定探索空間"""
    ranges = DEFAULT_LOGREG_SPACE if Algorithm(algorithm) == Algorithm.LOGREG else DEFAULT_GBDT_SPACE
    return HyperparamSpace(
        algorithm=algorithm,
        awareness=awareness,
        ranges={name: ParamRange(**spec) for name, spec in ranges.items()},
    )


def _draw(rng, spec: ParamRange) -> float:
    if spec.scale == "choice":
        return spec.choices[int(rng.integers(0, len(spec.choices)))]
    if spec.scale == "log":
        return float(math.exp(rng.uniform(math.log(spec.low), math.log(spec.high))))
    if spec.scale == "int":
        return int(rng.integers(int(math.ceil(spec.low)), int(math.floor(spec.high)) + 1))
    return float(rng.uniform(spec.low, spec.high))


def sample_hyperparams(space: HyperparamSpace, n_trials: int, seed: int) -> List[ModelConfig]:
    """
    探索空間から独立に n_trials 個の設定を一様サンプリング

    TPE の代わりに同じ空間上のランダムサーチを使う。

    Args:
        space (HyperparamSpace): 探索空間
        n_trials (int): 試行数
        seed (int): 乱数シード

    Returns:
        List[ModelConfig]: config_id が 0..n_trials-1 の設定リスト

    Raises:
        EmptySpace: 探索空間が空
    """
    if not space.ranges:
        raise EmptySpace(f"{space.algorithm.value} の探索空間が空です")
    if n_trials < 1:
        raise LearnerError(f"n_trials は1以上で指定してください: {n_trials}")

    rng = make_rng(seed)
    names = sorted(space.ranges)
    configs = []
    for trial in range(n_trials):
        params: Dict[str, float] = {name: _draw(rng, space.ranges[name]) for name in names}
        configs.append(
            ModelConfig(config_id=trial, algorithm=space.algorithm, awareness=space.awareness, hyperparams=params)
        )
    return configs

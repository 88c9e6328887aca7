"""
シナリオ実行サービス

実験設定からシナリオ1・2を1シード分実行します。
"""
from typing import Optional

from app.schemas.schemas import ExperimentConfig, Scenario1Report, Scenario2Report, ThresholdPolicy
from app.services.learners.search_hyperparams import build_trial_configs
from app.services.scenarios.config.scenario_config import STREAM_CONFIGS
from app.services.scenarios.core.scenario1_engine import Scenario1Engine
from app.services.scenarios.core.scenario2_engine import Scenario2Engine, Scenario2Run, Scorer
from app.services.shared.exceptions import PerfloopError, ScenarioError
from app.services.shared.logging_utils import log_simulation_info
from app.services.shared.seeding import derive_seed


def _trial_configs(config: ExperimentConfig, n_trials: int, seed: int):
    return build_trial_configs(
        config.space, config.algorithm, config.awareness, n_trials, derive_seed(seed, STREAM_CONFIGS)
    )


def run_scenario1(config: ExperimentConfig, seed: int, n_trials: Optional[int] = None) -> Scenario1Report:
    """
    シナリオ1（不正者の適応）を実行

    Args:
        config (ExperimentConfig): 実験設定（base・bias・探索空間・目標FPR）
        seed (int): 乱数シード
        n_trials (Optional[int]): 試行数（未指定なら config.n_trials）

    Returns:
        Scenario1Report: 3つの世界の試行結果

    Raises:
        ScenarioError: シナリオの実行に失敗した場合
    """
    try:
        n_trials = n_trials or config.n_trials
        log_simulation_info(f"シナリオ1を開始 (seed={seed}, trials={n_trials})")
        engine = Scenario1Engine(config.base, config.bias, config.policy.target_fpr)
        return engine.run(_trial_configs(config, n_trials, seed), seed)
    except PerfloopError:
        raise
    except Exception as e:
        raise ScenarioError(f"シナリオ1の実行中にエラーが発生しました: {e}") from e


def run_scenario2_detailed(
    config: ExperimentConfig,
    seed: int,
    policy: Optional[ThresholdPolicy] = None,
    n_trials: Optional[int] = None,
    drop_old: Optional[bool] = None,
    scorer_override: Optional[Scorer] = None,
) -> Scenario2Run:
    """
    シナリオ2（選択的ラベル）を実行し、選択モデルと最終データセットも返す

    Args:
        config (ExperimentConfig): 実験設定
        seed (int): 乱数シード
        policy (Optional[ThresholdPolicy]): 閾値ポリシー（未指定なら config.policy）
        n_trials (Optional[int]): 試行数（未指定なら config.n_trials）
        drop_old (Optional[bool]): 古い学習データを捨てるか（未指定なら config.drop_old）
        scorer_override (Optional[Scorer]): 学習の代わりに使うスコア関数

    Returns:
        Scenario2Run: 実行結果

    Raises:
        ScenarioError: シナリオの実行に失敗した場合
    """
    try:
        policy = policy or config.policy
        n_trials = n_trials or config.n_trials
        drop_old = config.drop_old if drop_old is None else drop_old
        log_simulation_info(
            f"シナリオ2を開始 (seed={seed}, policy={policy.kind.value}, trials={n_trials}, drop_old={drop_old})"
        )
        engine = Scenario2Engine(config.base, config.bias, policy, drop_old, scorer_override)
        configs = [] if scorer_override is not None else _trial_configs(config, n_trials, seed)
        return engine.run(configs, seed)
    except PerfloopError:
        raise
    except Exception as e:
        raise ScenarioError(f"シナリオ2の実行中にエラーが発生しました: {e}") from e


def run_scenario2(
    config: ExperimentConfig,
    seed: int,
    policy: Optional[ThresholdPolicy] = None,
    n_trials: Optional[int] = None,
    drop_old: Optional[bool] = None,
    scorer_override: Optional[Scorer] = None,
) -> Scenario2Report:
    return run_scenario2_detailed(config, seed, policy, n_trials, drop_old, scorer_override).report

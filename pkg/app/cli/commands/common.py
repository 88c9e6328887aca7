"""
サブコマンド共通のオプションと設定読み込み
"""
import argparse

from app.schemas.schemas import ExperimentConfig, ScenarioName
from app.services.runner.experiment_config import apply_overrides, load_experiment_config


def add_common_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="実験設定JSONのパス（未指定なら既定の実験）")
    parser.add_argument("--seed-offset", type=int, default=0, help="全シードに加算するオフセット")
    parser.add_argument("--out", default=None, help="出力ディレクトリ")
    parser.add_argument("--trials", type=int, default=None, help="ハイパーパラメータ試行数")


def config_from_args(args: argparse.Namespace, scenario: ScenarioName = None) -> ExperimentConfig:
    """
    --config を読み込み、CLI オプションで上書きした設定を返す

    Raises:
        ConfigError: 設定ファイルや上書き値が不正
    """
    config = load_experiment_config(args.config)
    if scenario is not None and config.scenario != scenario:
        config = config.model_copy(update={"scenario": scenario})
    return apply_overrides(config, seed_offset=args.seed_offset, out=args.out, trials=args.trials)

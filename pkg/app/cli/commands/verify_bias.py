import argparse

from app.cli.commands.common import add_common_options, config_from_args
from app.services.runner.config.runner_config import EXIT_OK
from app.services.runner.execute_experiment import ExperimentRunnerService


def register(subparsers) -> None:
    parser = subparsers.add_parser("verify-bias", help="注入したバイアス条件を統計検定で検証")
    add_common_options(parser)
    parser.add_argument("--dataset", default=None, help="検証するデータセットCSV（未指定なら設定から生成）")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    """
    検証レポートを書き出す。不合格の条件があっても実行自体は成功扱い（結果はレポートに記録）。
    """
    config = config_from_args(args)
    ExperimentRunnerService(config).verify_bias(args.dataset)
    return EXIT_OK

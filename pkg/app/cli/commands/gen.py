import argparse

from app.cli.commands.common import add_common_options, config_from_args
from app.services.runner.config.runner_config import EXIT_OK
from app.services.runner.execute_experiment import ExperimentRunnerService


def register(subparsers) -> None:
    parser = subparsers.add_parser("gen", help="バイアス付き合成データセットを生成")
    add_common_options(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    ExperimentRunnerService(config).generate_datasets()
    return EXIT_OK

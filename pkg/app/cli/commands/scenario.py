import argparse

from app.cli.commands.common import add_common_options, config_from_args
from app.schemas.schemas import ScenarioName
from app.services.runner.config.runner_config import EXIT_OK
from app.services.runner.execute_experiment import ExperimentRunnerService


def register(subparsers) -> None:
    for scenario, help_text in (
        (ScenarioName.SCENARIO1, "適応的な不正者による分布シフトの実験"),
        (ScenarioName.SCENARIO2, "選択的ラベルによるノイズ蓄積の実験"),
    ):
        parser = subparsers.add_parser(scenario.value, help=help_text)
        add_common_options(parser)
        parser.set_defaults(handler=run, scenario=scenario)


def run(args: argparse.Namespace) -> int:
    config = config_from_args(args, scenario=args.scenario)
    ExperimentRunnerService(config).run_scenarios()
    return EXIT_OK

import argparse

from app.cli.commands.common import add_common_options, config_from_args
from app.services.runner.config.runner_config import EXIT_OK
from app.services.runner.execute_experiment import build_report


def register(subparsers) -> None:
    parser = subparsers.add_parser("report", help="シードごとの結果を集計してプロット用テーブルを出力")
    add_common_options(parser)
    parser.add_argument("--input", default=None, help="集計するシナリオ出力ディレクトリ（未指定なら出力ディレクトリ）")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    input_dir = args.input if args.input is not None else config.output_dir
    build_report(input_dir, config.output_dir)
    return EXIT_OK

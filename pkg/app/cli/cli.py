"""
コマンドラインのエントリーポイント

perfloop <gen|verify-bias|scenario1|scenario2|report> --config <path>
    [--seed-offset k] [--out dir] [--trials n]
"""
import argparse
import sys
from typing import List, Optional

from pydantic import ValidationError

from app.cli.commands import gen, report, scenario, verify_bias
from app.services.runner.config.runner_config import EXIT_CONFIG_ERROR, EXIT_RUNTIME_ERROR
from app.services.shared.exceptions import ConfigError, PerfloopError
from app.services.shared.logging_utils import log_simulation_error


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="perfloop", description="パフォーマティブ予測のバイアスシミュレーター")
    subparsers = parser.add_subparsers(dest="command", metavar="<gen|verify-bias|scenario1|scenario2|report>")
    subparsers.required = True

    gen.register(subparsers)
    verify_bias.register(subparsers)
    scenario.register(subparsers)
    report.register(subparsers)
    return parser


def cli_main(argv: Optional[List[str]] = None) -> int:
    """
    CLI を実行して終了コードを返す

    Returns:
        int: 0 = 成功, 1 = 実行時エラー, 2 = 設定・使い方の誤り
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse は使い方の誤りで usage を stderr に出して 2 で終了する
        return e.code if isinstance(e.code, int) else EXIT_CONFIG_ERROR

    try:
        return args.handler(args)
    except (ConfigError, ValidationError) as e:
        log_simulation_error("設定が不正です", e)
        print(f"perfloop: 設定エラー: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except PerfloopError as e:
        log_simulation_error(f"{args.command} の実行に失敗しました", e)
        print(f"perfloop: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME_ERROR
    except Exception as e:
        log_simulation_error(f"{args.command} で予期しないエラーが発生しました", e)
        print(f"perfloop: 予期しないエラー: {e}", file=sys.stderr)
        return EXIT_RUNTIME_ERROR

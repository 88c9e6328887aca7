"""
ログ出力用のユーティリティ関数
"""
import logging
import sys
from typing import Any

from app.services.shared.config.shared_config import ENABLE_DEBUG_LOGGING, LOGGER_NAME

# ロガーの設定
logger = logging.getLogger(LOGGER_NAME)

# ハンドラーが設定されていない場合のみ設定
if not logger.handlers:
    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(logging.DEBUG)

    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    console_handler.setFormatter(formatter)

    logger.addHandler(console_handler)
    logger.setLevel(logging.DEBUG if ENABLE_DEBUG_LOGGING else logging.INFO)
    logger.propagate = False  # 親ロガーへの伝播を停止


def log_simulation_debug(message: str, data: Any = None) -> None:
    """
    シミュレーション処理のデバッグログを出力

    Args:
        message (str): ログメッセージ
        data (Any, optional): 出力するデータ
    """
    if ENABLE_DEBUG_LOGGING:
        logger.debug(f"{message}: {data}" if data is not None else message)


def log_simulation_info(message: str) -> None:
    """
    シミュレーション処理の情報ログを出力

    Args:
        message (str): ログメッセージ
    """
    logger.info(message)


def log_simulation_error(message: str, error: Exception = None) -> None:
    """
    シミュレーション処理のエラーログを出力

    Args:
        message (str): ログメッセージ
        error (Exception, optional): 例外オブジェクト
    """
    if error:
        logger.error(f"{message}: {error}")
    else:
        logger.error(message)

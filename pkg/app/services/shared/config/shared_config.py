"""
共通設定値（ログ・環境変数）
"""
import os
from dotenv import load_dotenv

ENV_FILE_PATH = ".env.local"

# 環境変数の読み込み
load_dotenv(ENV_FILE_PATH)

DEBUG_ENV_KEY = "PERFLOOP_DEBUG"

LOGGER_NAME = "perfloop"

# ログ出力設定
ENABLE_DEBUG_LOGGING = os.getenv(DEBUG_ENV_KEY, "false").strip().lower() in ("1", "true", "yes")

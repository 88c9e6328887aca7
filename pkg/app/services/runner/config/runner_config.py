"""
実験ランナーの設定値
"""
import os

from dotenv import load_dotenv

load_dotenv(".env.local")

TOOL_VERSION = "0.1.0"

# シード並列実行のワーカー数
WORKERS_ENV_KEY = "PERFLOOP_WORKERS"


def _workers_from_env() -> int:
    # 未設定ならCPU数
    raw = os.getenv(WORKERS_ENV_KEY)
    if raw is None:
        return os.cpu_count() or 1
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


WORKERS = _workers_from_env()

# 出力ファイル名
MANIFEST_FILE = "manifest.json"
CONFIG_FILE = "config.json"
SCHEMA_FILE = "config.schema.json"
DATASET_FILE = "dataset_seed{seed}.csv"
VERIFICATION_FILE = "bias_verification_seed{seed}.json"
VERIFICATION_DATASET_FILE = "bias_verification_{stem}.json"
SCENARIO1_REPORT_FILE = "scenario1_seed{seed}.json"
SCENARIO1_TRIALS_FILE = "trials_seed{seed}.csv"
SCENARIO2_REPORT_FILE = "scenario2_seed{seed}.json"
SCENARIO2_METRICS_FILE = "metrics_seed{seed}.csv"
SCENARIO2_LEDGER_FILE = "ledger_seed{seed}.csv"
MODEL_DIR = "models"
MODEL_FILE = "seed{seed}_iter{iteration}.json"
SUMMARY_ROWS_FILE = "summary_rows_seed{seed}.csv"
SUMMARY_ROWS_GLOB = "summary_rows_seed*.csv"
TRIALS_GLOB = "trials_seed*.csv"
METRICS_GLOB = "metrics_seed*.csv"
SUMMARY_FILE = "summary.csv"
PLOT_SCENARIO1_FILE = "plot_scenario1.csv"
PLOT_SCENARIO2_FILE = "plot_scenario2.csv"

# 集計テーブルの列
SUMMARY_KEY_COLUMNS = ["scenario", "world", "iteration", "policy", "label_source", "metric"]
SUMMARY_ROW_COLUMNS = SUMMARY_KEY_COLUMNS + ["seed", "value"]
LEDGER_COLUMNS = ["iteration", "id", "action"]

# CLI の終了コード
EXIT_OK = 0
EXIT_RUNTIME_ERROR = 1
EXIT_CONFIG_ERROR = 2

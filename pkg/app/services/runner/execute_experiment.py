"""
実験実行サービス

データセット生成・バイアス検証・シナリオのシード掃引・集計レポートを
実行し、結果をすべて出力ディレクトリに書き出します。
"""
import multiprocessing
import time
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import pandas as pd

from app.schemas.schemas import BiasSpec, BiasVerificationReport, ExperimentConfig, ScenarioName
from app.services.learners.core.model_io import model_to_json
from app.services.runner.config.runner_config import (
    CONFIG_FILE,
    DATASET_FILE,
    METRICS_GLOB,
    MODEL_DIR,
    MODEL_FILE,
    PLOT_SCENARIO1_FILE,
    PLOT_SCENARIO2_FILE,
    SCENARIO1_REPORT_FILE,
    SCENARIO1_TRIALS_FILE,
    SCENARIO2_LEDGER_FILE,
    SCENARIO2_METRICS_FILE,
    SCENARIO2_REPORT_FILE,
    SCHEMA_FILE,
    SUMMARY_FILE,
    SUMMARY_ROW_COLUMNS,
    SUMMARY_ROWS_FILE,
    SUMMARY_ROWS_GLOB,
    TRIALS_GLOB,
    VERIFICATION_DATASET_FILE,
    VERIFICATION_FILE,
    WORKERS,
    LEDGER_COLUMNS,
)
from app.services.runner.core.aggregate_engine import aggregate_reports, plot_table
from app.services.runner.core.report_tables import (
    ledger_rows,
    scenario1_summary_rows,
    scenario1_trial_rows,
    scenario2_metric_rows,
    scenario2_summary_rows,
)
from app.services.runner.experiment_config import config_schema, ensure_output_dir
from app.services.runner.manifest import write_manifest
from app.services.fairmetrics.export_metrics import rows_to_frame
from app.services.scenarios.config.scenario_config import default_scenario1_bias, default_scenario2_bias
from app.services.scenarios.run_scenarios import run_scenario1, run_scenario2_detailed
from app.services.shared.exceptions import PerfloopError, RunnerError, SchemaMismatch
from app.services.shared.logging_utils import log_simulation_error, log_simulation_info
from app.services.shared.output_file import save_output_file, save_output_frame, save_output_text
from app.services.synthdata.build_dataset import build_biased_dataset
from app.services.synthdata.core.dataset import load_dataset, save_dataset
from app.services.synthdata.core.verification_engine import verify_bias_conditions

def default_bias_for(config: ExperimentConfig) -> BiasSpec:
    """設定に bias が無い場合のシナリオ既定バイアス"""
    if config.bias is not None:
        return config.bias
    if config.scenario == ScenarioName.SCENARIO1:
        return default_scenario1_bias(config.base.n_months)
    return default_scenario2_bias()

def _run_scenario1_seed(config: ExperimentConfig, seed: int, out: Path) -> List[str]:
    report = run_scenario1(config, seed)
    written = [
        save_output_file(report.model_dump(mode="json"), out / SCENARIO1_REPORT_FILE.format(seed=seed)),
        save_output_frame(pd.DataFrame(scenario1_trial_rows(report)), out / SCENARIO1_TRIALS_FILE.format(seed=seed)),
        save_output_frame(
            pd.DataFrame(scenario1_summary_rows(report), columns=SUMMARY_ROW_COLUMNS),
            out / SUMMARY_ROWS_FILE.format(seed=seed),
        ),
    ]
    return [str(p) for p in written]

def _run_scenario2_seed(config: ExperimentConfig, seed: int, out: Path) -> List[str]:
    run = run_scenario2_detailed(config, seed)
    report = run.report
    written = [
        save_output_file(report.model_dump(mode="json"), out / SCENARIO2_REPORT_FILE.format(seed=seed)),
        save_output_frame(rows_to_frame(scenario2_metric_rows(report)), out / SCENARIO2_METRICS_FILE.format(seed=seed)),
        save_output_frame(
            pd.DataFrame(ledger_rows(report), columns=LEDGER_COLUMNS),
            out / SCENARIO2_LEDGER_FILE.format(seed=seed),
        ),
        save_output_frame(
            pd.DataFrame(scenario2_summary_rows(report), columns=SUMMARY_ROW_COLUMNS),
            out / SUMMARY_ROWS_FILE.format(seed=seed),
        ),
    ]
    for record, model in zip(report.iterations, run.selected_models):
        if model is not None:
            path = out / MODEL_DIR / MODEL_FILE.format(seed=seed, iteration=record.iteration)
            written.append(save_output_text(model_to_json(model), path))
    return [str(p) for p in written]

def run_seed(args: Tuple[str, int]) -> Tuple[int, List[str], float]:
    """
    1シード分のシナリオを実行（ワーカープロセスからも呼ばれる）

    Args:
        args (Tuple[str, int]): (設定JSON, シード)

    Returns:
        Tuple[int, List[str], float]: (シード, 書き出したファイル, 経過秒数)
    """
    config_json, seed = args
    config = ExperimentConfig.model_validate_json(config_json)
    out = Path(config.output_dir)
    started = time.perf_counter()
    if config.scenario == ScenarioName.SCENARIO1:
        files = _run_scenario1_seed(config, seed, out)
    else:
        files = _run_scenario2_seed(config, seed, out)
    return seed, files, time.perf_counter() - started

class ExperimentRunnerService:
    """CLI の各サブコマンドに対応する実験実行サービス"""

    def __init__(self, config: ExperimentConfig, workers: int = WORKERS):
        self.config = config
        self.workers = workers

    def _write_config_files(self, out: Path) -> List[str]:
        config_path = save_output_file(self.config.model_dump(mode="json"), out / CONFIG_FILE)
        schema_path = save_output_file(config_schema(), out / SCHEMA_FILE)
        return [str(config_path), str(schema_path)]

    def generate_datasets(self) -> Dict[str, List[str]]:
        """
        シードごとにバイアス付きデータセットを生成して保存

        Returns:
            Dict[str, List[str]]: シードごとの出力ファイル

        Raises:
            PerfloopError: 生成に失敗した場合
        """
        out = ensure_output_dir(self.config)
        bias = default_bias_for(self.config)
        files: Dict[str, List[str]] = {"config": self._write_config_files(out)}
        stages: Dict[str, float] = {}
        for seed in self.config.seeds:
            started = time.perf_counter()
            ds = build_biased_dataset(self.config.base, bias, seed)
            paths = save_dataset(ds, out / DATASET_FILE.format(seed=seed))
            files[f"seed{seed}"] = [str(p) for p in paths]
            stages[f"gen_seed{seed}"] = time.perf_counter() - started
            log_simulation_info(f"データセットを保存しました: {paths[0]}")
        write_manifest(self.config, files, stages, used_search=False)
        return files

    def verify_bias(self, dataset_path: Optional[Union[str, Path]] = None) -> List[BiasVerificationReport]:
        """
        バイアス条件を検証してレポートを保存

        dataset_path を指定した場合はそのファイルのみ、指定しない場合は
        設定の各シードでデータセットを生成して検証する。

        Returns:
            List[BiasVerificationReport]: 検証レポート
        """
        out = ensure_output_dir(self.config)
        reports = []
        if dataset_path is not None:
            report = verify_bias_conditions(load_dataset(dataset_path), self.config.alpha)
            save_output_file(report.model_dump(mode="json"), out / VERIFICATION_DATASET_FILE.format(stem=Path(dataset_path).stem))
            return [report]

        bias = default_bias_for(self.config)
        for seed in self.config.seeds:
            ds = build_biased_dataset(self.config.base, bias, seed)
            report = verify_bias_conditions(ds, self.config.alpha)
            save_output_file(report.model_dump(mode="json"), out / VERIFICATION_FILE.format(seed=seed))
            log_simulation_info(f"バイアス検証 (seed={seed}): {'合格' if report.all_passed else '不合格'}")
            reports.append(report)
        return reports

    def run_scenarios(self) -> Dict[str, List[str]]:
        """
        全シードでシナリオを実行し、レポートとマニフェストを書き出す

        PERFLOOP_WORKERS が2以上ならシードをプロセスプールで並列実行する。
        各シードの出力は独立したファイルなので実行順に依存しない。

        Returns:
            Dict[str, List[str]]: シードごとの出力ファイル

        Raises:
            RunnerError: シナリオ実行に失敗した場合
        """
        out = ensure_output_dir(self.config)
        files: Dict[str, List[str]] = {"config": self._write_config_files(out)}
        stages: Dict[str, float] = {}
        config_json = self.config.model_dump_json()
        jobs = [(config_json, seed) for seed in self.config.seeds]
        log_simulation_info(
            f"{self.config.scenario.value} を {len(jobs)} シードで開始 (workers={self.workers})"
        )
        started = time.perf_counter()
        try:
            if self.workers > 1 and len(jobs) > 1:
                with multiprocessing.get_context("spawn").Pool(min(self.workers, len(jobs))) as pool:
                    results = pool.map(run_seed, jobs)
            else:
                results = [run_seed(job) for job in jobs]
        except PerfloopError:
            raise
        except Exception as e:
            log_simulation_error("シナリオ実行に失敗しました", e)
            raise RunnerError(f"シナリオ実行中にエラーが発生しました: {e}") from e

        for seed, paths, seconds in results:
            files[f"seed{seed}"] = paths
            stages[f"seed{seed}"] = seconds
        stages["total"] = time.perf_counter() - started
        write_manifest(self.config, files, stages)
        return files

def _read_frames(input_dir: Path, pattern: str) -> List[pd.DataFrame]:
    return [pd.read_csv(path) for path in sorted(input_dir.glob(pattern))]

def build_report(input_dir: Union[str, Path], out_dir: Optional[Union[str, Path]] = None) -> List[Path]:
    """
    シードごとの出力を集計して summary とプロット用テーブルを書き出す

    入力ファイルだけから計算する純粋な処理で、同じ入力なら同じ出力になる。

    Args:
        input_dir (Union[str, Path]): シナリオ実行の出力ディレクトリ
        out_dir (Optional[Union[str, Path]]): 書き出し先（未指定なら input_dir）

    Returns:
        List[Path]: 書き出したファイル

    Raises:
        SchemaMismatch: 集計対象が無い、または列構成が揃っていない
    """
    input_dir = Path(input_dir)
    out = Path(out_dir) if out_dir is not None else input_dir
    summary = aggregate_reports(_read_frames(input_dir, SUMMARY_ROWS_GLOB))
    written = [save_output_frame(summary, out / SUMMARY_FILE)]

    trials = _read_frames(input_dir, TRIALS_GLOB)
    if trials:
        table = plot_table(trials, x="tpr", y="log2_fpr_ratio", keys=["seed", "world", "config_id", "is_top"])
        written.append(save_output_frame(table, out / PLOT_SCENARIO1_FILE))
    metrics = _read_frames(input_dir, METRICS_GLOB)
    if metrics:
        table = plot_table(metrics, x="iteration", y="fpr", keys=["seed", "policy", "label_source", "group"])
        written.append(save_output_frame(table, out / PLOT_SCENARIO2_FILE))
    if not trials and not metrics:
        raise SchemaMismatch(f"プロット用の入力がありません: {input_dir}")
    log_simulation_info(f"集計レポートを書き出しました: {[str(p) for p in written]}")
    return written

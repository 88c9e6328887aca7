"""
シナリオレポートを表形式の行に変換
"""
import statistics
from typing import Dict, List, Optional

from app.schemas.schemas import (
    LabelSource,
    LedgerAction,
    MetricsReport,
    PolicyKind,
    Scenario1Report,
    Scenario2Report,
    ScenarioName,
    World,
    WorldResult,
)
from app.services.fairmetrics.export_metrics import metrics_to_rows
from app.services.synthdata.config.synthdata_config import GROUP_NAMES


def _median(values: List[Optional[float]]) -> Optional[float]:
    defined = [v for v in values if v is not None]
    return statistics.median(defined) if defined else None


def _ranked_ids(report: Scenario1Report, world: str) -> List[int]:
    # adaptation は実務者が選んだ performance_ideal の上位モデルで評価する
    if world == World.ADAPTATION.value:
        return report.believed_top_ids
    return report.worlds[world].top_ids


def scenario1_trial_rows(report: Scenario1Report) -> List[Dict]:
    """試行ごとの行（x = TPR, y = log2 FPR比 のプロット用）"""
    rows = []
    for world, result in sorted(report.worlds.items()):
        top = set(_ranked_ids(report, world))
        for trial in result.trials:
            row = {
                "seed": report.seed,
                "world": world,
                "config_id": trial.config_id,
                "tpr": trial.tpr,
                "log2_fpr_ratio": trial.log2_fpr_ratio.value,
                "cutoff": trial.cutoff,
                "is_top": trial.config_id in top,
            }
            for group in GROUP_NAMES:
                row[f"fpr_{group}"] = trial.group_fpr.get(group)
                row[f"tpr_{group}"] = trial.group_tpr.get(group)
            rows.append(row)
    return rows


def _top_trials(report: Scenario1Report, world: str, result: WorldResult):
    return [result.trial(config_id) for config_id in _ranked_ids(report, world)]


def scenario1_summary_rows(report: Scenario1Report) -> List[Dict]:
    """世界ごとに上位モデルの中央値を1シード分の値として出す"""
    rows = []
    for world, result in sorted(report.worlds.items()):
        top = _top_trials(report, world, result)
        ratios = [t.log2_fpr_ratio.value for t in top]
        values = {
            "tpr": _median([t.tpr for t in top]),
            "log2_fpr_ratio": _median(ratios),
            "abs_log2_fpr_ratio": _median([abs(v) if v is not None else None for v in ratios]),
        }
        for metric, value in values.items():
            rows.append({
                "scenario": ScenarioName.SCENARIO1.value,
                "world": world,
                "iteration": None,
                "policy": PolicyKind.GLOBAL.value,
                "label_source": LabelSource.TRUE_LABELS.value,
                "metric": metric,
                "seed": report.seed,
                "value": value,
            })
    return rows


def _metric_values(report: MetricsReport) -> Dict[str, Optional[float]]:
    values = {
        "tpr": report.overall.tpr,
        "fpr": report.overall.fpr,
        "log2_fpr_ratio": report.log2_fpr_ratio.value,
        "abs_log2_fpr_ratio": abs(report.log2_fpr_ratio.value) if report.log2_fpr_ratio.defined else None,
    }
    for group in GROUP_NAMES:
        values[f"fpr_{group}"] = report.by_group[group].fpr
    return values


def scenario2_summary_rows(report: Scenario2Report) -> List[Dict]:
    """反復 × ラベル源ごとの指標（perceived は観測ラベル、real は真のラベル）"""
    rows = []
    for record in report.iterations:
        for metrics in (record.perceived, record.real):
            for metric, value in _metric_values(metrics).items():
                rows.append({
                    "scenario": ScenarioName.SCENARIO2.value,
                    "world": None,
                    "iteration": record.iteration,
                    "policy": report.policy.kind.value,
                    "label_source": metrics.evaluated_against.value,
                    "metric": metric,
                    "seed": report.seed,
                    "value": value,
                })
    return rows


def scenario2_metric_rows(report: Scenario2Report) -> List[Dict]:
    """fairmetrics のエクスポート形式（scenario, iteration 列付き）"""
    rows = []
    for record in report.iterations:
        for metrics in (record.perceived, record.real):
            rows.extend(
                metrics_to_rows(
                    metrics,
                    scenario=ScenarioName.SCENARIO2.value,
                    iteration=record.iteration,
                    seed=report.seed,
                    policy=report.policy.kind.value,
                )
            )
    return rows


def ledger_rows(report: Scenario2Report) -> List[Dict]:
    rows = []
    for entry in report.ledger.entries:
        rows.extend(
            {"iteration": entry.iteration, "id": i, "action": LedgerAction.RELABELED_POSITIVE.value}
            for i in entry.relabeled_positive_ids
        )
        rows.extend(
            {"iteration": entry.iteration, "id": i, "action": LedgerAction.REVEALED.value}
            for i in entry.revealed_ids
        )
    return rows

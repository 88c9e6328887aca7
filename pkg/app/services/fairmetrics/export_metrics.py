"""
指標レポートの表形式エクスポート
"""
from typing import Dict, List, Optional

import pandas as pd

from app.schemas.schemas import GroupRates, MetricsReport
from app.services.fairmetrics.config.fairmetrics_config import METRICS_EXPORT_COLUMNS, OVERALL_GROUP


def _row(
    report: MetricsReport,
    group: str,
    group_rates: GroupRates,
    scenario: str,
    iteration: Optional[int],
    seed: int,
    policy: str,
) -> Dict:
    counts = report.counts.overall if group == OVERALL_GROUP else report.counts.by_group[group]
    return {
        "scenario": scenario,
        "iteration": iteration,
        "seed": seed,
        "policy": policy,
        "label_source": report.evaluated_against.value,
        "group": group,
        "tp": counts.tp,
        "fp": counts.fp,
        "tn": counts.tn,
        "fn": counts.fn,
        "tpr": group_rates.tpr,
        "fpr": group_rates.fpr,
        "fnr": group_rates.fnr,
        "precision": group_rates.precision,
        "log2_fpr_ratio": report.log2_fpr_ratio.value,
        "log2_fnr_ratio": report.log2_fnr_ratio.value,
    }


def metrics_to_rows(
    report: MetricsReport,
    scenario: str,
    iteration: Optional[int],
    seed: int,
    policy: str,
) -> List[Dict]:
    """
    レポートを全体行とグループ別行に展開

    未定義の率・比は None（CSVでは空欄）になる。
    """
    rows = [_row(report, OVERALL_GROUP, report.overall, scenario, iteration, seed, policy)]
    for group in sorted(report.by_group):
        rows.append(_row(report, group, report.by_group[group], scenario, iteration, seed, policy))
    return rows


def rows_to_frame(rows: List[Dict]) -> pd.DataFrame:
    return pd.DataFrame(rows, columns=METRICS_EXPORT_COLUMNS)

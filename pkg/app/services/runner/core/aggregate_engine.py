"""
シード横断の集計（中央値・最小・最大）とプロット用テーブル
"""
from typing import List, Sequence

import pandas as pd

from app.services.runner.config.runner_config import SUMMARY_KEY_COLUMNS, SUMMARY_ROW_COLUMNS
from app.services.shared.exceptions import SchemaMismatch


def _check_schema(frames: Sequence[pd.DataFrame], required: List[str]) -> None:
    if not frames:
        raise SchemaMismatch("集計対象のレポートがありません")
    reference = list(frames[0].columns)
    missing = [c for c in required if c not in reference]
    if missing:
        raise SchemaMismatch(f"必須列がありません: {missing}")
    for i, frame in enumerate(frames[1:], start=1):
        if list(frame.columns) != reference:
            raise SchemaMismatch(f"レポート {i} の列構成が一致しません: {list(frame.columns)} != {reference}")


def aggregate_reports(frames: Sequence[pd.DataFrame]) -> pd.DataFrame:
    """
    シードごとの行を (world/iteration, policy, label_source, metric) 単位で集計

    Args:
        frames (Sequence[pd.DataFrame]): シードごとの長形式テーブル
            （列: scenario, world, iteration, policy, label_source, metric, seed, value）

    Returns:
        pd.DataFrame: median / min / max / n_seeds / n_undefined の集計表

    Raises:
        SchemaMismatch: レポートが無い、または列構成が揃っていない
    """
    _check_schema(frames, SUMMARY_ROW_COLUMNS)
    data = pd.concat(frames, ignore_index=True)
    scenarios = data["scenario"].dropna().unique()
    if len(scenarios) > 1:
        raise SchemaMismatch(f"複数のシナリオが混在しています: {sorted(scenarios)}")

    data["value"] = pd.to_numeric(data["value"], errors="coerce")
    grouped = data.groupby(SUMMARY_KEY_COLUMNS, dropna=False, sort=True)["value"]
    summary = grouped.agg(["median", "min", "max", "size", "count"]).reset_index()
    summary = summary.rename(columns={"size": "n_seeds"})
    summary["n_undefined"] = summary["n_seeds"] - summary["count"]
    return summary.drop(columns=["count"])


def plot_table(frames: Sequence[pd.DataFrame], x: str, y: str, keys: List[str]) -> pd.DataFrame:
    """
    プロット用の (x, y) テーブル

    Raises:
        SchemaMismatch: 列構成が揃っていない
    """
    _check_schema(frames, keys + [x, y])
    data = pd.concat(frames, ignore_index=True)
    table = data[keys + [x, y]].rename(columns={x: "x", y: "y"})
    return table.sort_values(keys, kind="stable").reset_index(drop=True)

"""
出力ファイルの書き込み（一時ファイルに書いてからリネームする）
"""
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Union

import pandas as pd


def _atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.remove(tmp_name)
        raise


def save_output_file(data: Union[dict, list], path: Union[str, Path]) -> Path:
    """
    辞書・リストをJSONファイルとして保存

    キーはソートして書き込むため、同じ内容なら常に同一バイト列になる。

    Args:
        data (Union[dict, list]): 保存するデータ
        path (Union[str, Path]): 出力先パス

    Returns:
        Path: 保存したファイルのパス
    """
    path = Path(path)
    _atomic_write_text(path, json.dumps(data, ensure_ascii=False, indent=2, sort_keys=True) + "\n")
    return path


def save_output_text(text: str, path: Union[str, Path]) -> Path:
    """テキストをそのまま保存"""
    path = Path(path)
    _atomic_write_text(path, text)
    return path


def save_output_frame(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    """
    DataFrameをCSVとして保存

    Args:
        frame (pd.DataFrame): 保存するテーブル
        path (Union[str, Path]): 出力先パス

    Returns:
        Path: 保存したファイルのパス
    """
    path = Path(path)
    _atomic_write_text(path, frame.to_csv(index=False, lineterminator="\n"))
    return path


def load_output_file(path: Union[str, Path]) -> Any:
    """JSONファイルを読み込む"""
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)

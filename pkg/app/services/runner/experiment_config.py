"""
実験設定ファイルの読み込み・検証・ハッシュ
"""
import hashlib
import json
import os
from pathlib import Path
from typing import Optional, Union

from pydantic import ValidationError

from app.schemas.schemas import ExperimentConfig
from app.services.shared.exceptions import ConfigError


def load_experiment_config(path: Optional[Union[str, Path]] = None) -> ExperimentConfig:
    """
    JSON の実験設定を読み込んで検証

    全フィールドに既定値があるため、パス未指定や空ファイル・{} は既定の実験になる。

    Args:
        path (Optional[Union[str, Path]]): 設定ファイルのパス

    Returns:
        ExperimentConfig: 検証済みの設定

    Raises:
        ConfigError: ファイルが読めない、JSONとして不正、またはスキーマに合わない
    """
    if path is None:
        return ExperimentConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"設定ファイルを読み込めません: {path}: {e}") from e
    if not text.strip():
        return ExperimentConfig()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"設定ファイルがJSONとして不正です: {e}") from e
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"設定ファイルの検証に失敗しました:\n{e}") from e


def apply_overrides(
    config: ExperimentConfig,
    seed_offset: int = 0,
    out: Optional[str] = None,
    trials: Optional[int] = None,
) -> ExperimentConfig:
    """
    CLI オプションで設定を上書き

    Raises:
        ConfigError: 上書き後の設定が不正
    """
    data = config.model_dump(mode="json")
    if seed_offset:
        data["seeds"] = [s + seed_offset for s in data["seeds"]]
    if out is not None:
        data["output_dir"] = out
    if trials is not None:
        data["n_trials"] = trials
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"上書き後の設定が不正です:\n{e}") from e


def canonical_config_json(config: ExperimentConfig) -> str:
    return json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


def config_hash(config: ExperimentConfig) -> str:
    """正規化した設定JSONの sha256"""
    return hashlib.sha256(canonical_config_json(config).encode("utf-8")).hexdigest()


def ensure_output_dir(config: ExperimentConfig) -> Path:
    """
    出力ディレクトリを作成し、書き込み可能か確認

    Raises:
        ConfigError: 作成できない、または書き込めない
    """
    out = Path(config.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"出力ディレクトリを作成できません: {out}: {e}") from e
    if not os.access(out, os.W_OK):
        raise ConfigError(f"出力ディレクトリに書き込めません: {out}")
    return out


def config_schema() -> dict:
    return ExperimentConfig.model_json_schema()

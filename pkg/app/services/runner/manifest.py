"""
実行マニフェストの作成
"""
from pathlib import Path
from typing import Dict, List

from app.schemas.schemas import Algorithm, ExperimentConfig, RunManifest
from app.services.learners.config.learners_config import DEVIATION_GBDT, DEVIATION_RANDOM_SEARCH
from app.services.runner.config.runner_config import MANIFEST_FILE, TOOL_VERSION
from app.services.runner.experiment_config import config_hash
from app.services.shared.exceptions import RunnerError
from app.services.shared.output_file import save_output_file


def deviations_for(config: ExperimentConfig, used_search: bool = True) -> List[str]:
    """使用した手法の置き換え（ランダムサーチ・自前GBDT）"""
    deviations = []
    if used_search:
        deviations.append(DEVIATION_RANDOM_SEARCH)
    algorithm = config.space.algorithm if config.space is not None else config.algorithm
    if algorithm == Algorithm.GBDT:
        deviations.append(DEVIATION_GBDT)
    return deviations


def write_manifest(
    config: ExperimentConfig,
    files: Dict[str, List[str]],
    stage_seconds: Dict[str, float],
    used_search: bool = True,
) -> Path:
    """
    マニフェストを書き出す

    列挙されたファイルがすべて存在することを確認してから書き込む。

    Raises:
        RunnerError: 列挙されたファイルが存在しない
    """
    missing = [p for paths in files.values() for p in paths if not Path(p).exists()]
    if missing:
        raise RunnerError(f"出力ファイルが見つかりません: {missing}")
    manifest = RunManifest(
        config_hash=config_hash(config),
        tool_version=TOOL_VERSION,
        scenario=config.scenario.value,
        seeds=list(config.seeds),
        files=files,
        stage_seconds=stage_seconds,
        deviations=deviations_for(config, used_search),
        awareness=config.awareness,
    )
    return save_output_file(manifest.model_dump(mode="json"), Path(config.output_dir) / MANIFEST_FILE)

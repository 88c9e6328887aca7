from typing import Optional, Sequence

import numpy as np
import pytest

from app.schemas.schemas import BaseDataConfig, Condition, ExperimentConfig, ProvenanceEntry
from app.services.synthdata.config.synthdata_config import GROUP_CODE_A, GROUP_CODE_B
from app.services.synthdata.core.dataset import Dataset


def make_dataset(
    features,
    true_labels,
    groups: Optional[Sequence[str]] = None,
    months: Optional[Sequence[int]] = None,
    observed_labels=None,
    n_months: int = 8,
) -> Dataset:
    """配列から直接 Dataset を組み立てる（groups を渡すと保護属性付与済みとして扱う）"""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features[:, None]
    true_labels = np.asarray(true_labels, dtype=np.int8)
    n = true_labels.shape[0]
    provenance = ()
    codes = np.full(n, GROUP_CODE_A, dtype=np.int8)
    if groups is not None:
        codes = np.where(np.asarray(groups) == "A", GROUP_CODE_A, GROUP_CODE_B).astype(np.int8)
        provenance = (ProvenanceEntry(condition=Condition.GROUP_INDEPENDENCE, params={"group_share_A": 0.5}),)
    return Dataset(
        ids=np.arange(n, dtype=np.int64),
        months=np.zeros(n, dtype=np.int64) if months is None else np.asarray(months, dtype=np.int64),
        groups=codes,
        true_labels=true_labels,
        observed_labels=true_labels.copy() if observed_labels is None else np.asarray(observed_labels, dtype=np.int8),
        features=features,
        n_months=n_months,
        prevalence=float(true_labels.mean()),
        provenance=provenance,
    )


def balanced_label_dataset(positives_a: int, positives_b: int, size: int = 500) -> Dataset:
    """グループA・Bが各 size 行、正例数を指定した手組みのデータセット"""
    labels_a = np.zeros(size, dtype=np.int8)
    labels_a[:positives_a] = 1
    labels_b = np.zeros(size, dtype=np.int8)
    labels_b[:positives_b] = 1
    labels = np.concatenate([labels_a, labels_b])
    groups = ["A"] * size + ["B"] * size
    rng = np.random.default_rng(0)
    return make_dataset(rng.standard_normal((2 * size, 2)), labels, groups=groups)


@pytest.fixture
def small_base() -> BaseDataConfig:
    return BaseDataConfig(n=20_000, prevalence=0.05, d=4, n_months=8)


@pytest.fixture
def tiny_experiment(tmp_path) -> ExperimentConfig:
    """実行時間を抑えた実験設定（logreg・2試行・2シード）"""
    return ExperimentConfig(
        base=BaseDataConfig(n=6_000, prevalence=0.03, d=4, n_months=8),
        algorithm="logreg",
        n_trials=2,
        seeds=[1, 2],
        output_dir=str(tmp_path / "out"),
    )

"""
基本データセットの生成と保護属性の付与
"""
import math

import numpy as np

from app.schemas.schemas import Condition, ProvenanceEntry
from app.services.shared.exceptions import (
    DegenerateGroupShare,
    EmptyOrDegenerateConfig,
    InsufficientPositives,
)
from app.services.shared.logging_utils import log_simulation_debug
from app.services.shared.seeding import make_rng
from app.services.synthdata.config.synthdata_config import (
    BASE_MEAN_SEPARATION,
    GROUP_CODE_A,
    GROUP_CODE_B,
    MIN_POSITIVES,
)
from app.services.synthdata.core.dataset import Dataset


def positive_count(n: int, prevalence: float) -> int:
    """round(n * prevalence)（0.5 は切り上げ）"""
    return int(math.floor(n * prevalence + 0.5))


def gen_base(n: int, prevalence: float, d: int, n_months: int, seed: int) -> Dataset:
    """
    基本データセットを生成

    正例・負例それぞれを球面正規分布から生成する。平均の差は全次元に均等に
    配分し、線形モデルで中程度の分離性（TPR@5%FPR ≈ 0.5）になるようにする。

    Args:
        n (int): 行数
        prevalence (float): 正例の割合
        d (int): 特徴量の次元
        n_months (int): 月数 M
        seed (int): 乱数シード

    Returns:
        Dataset: 生成されたデータセット（グループは全員A、観測ラベル＝真のラベル）

    Raises:
        EmptyOrDegenerateConfig: n=0, d<2, M<2 または prevalence が (0,1) の範囲外
        InsufficientPositives: 正例が MIN_POSITIVES 未満
    """
    if n <= 0 or d < 2 or n_months < 2:
        raise EmptyOrDegenerateConfig(f"生成設定が退化しています (n={n}, d={d}, M={n_months})")
    if not 0.0 < prevalence < 1.0:
        raise EmptyOrDegenerateConfig(f"prevalence は (0,1) の範囲で指定してください: {prevalence}")
    if n * prevalence < MIN_POSITIVES:
        raise InsufficientPositives(
            f"正例数 {n * prevalence:.1f} が少なすぎます（最低 {MIN_POSITIVES} 件必要）"
        )

    rng = make_rng(seed)
    n_pos = positive_count(n, prevalence)

    labels = np.zeros(n, dtype=np.int8)
    labels[rng.permutation(n)[:n_pos]] = 1

    shift = BASE_MEAN_SEPARATION / math.sqrt(d)
    features = rng.standard_normal((n, d))
    features[labels == 1] += shift

    months = rng.integers(0, n_months, size=n, dtype=np.int64)

    log_simulation_debug("基本データセット生成", {"n": n, "positives": n_pos, "d": d, "months": n_months, "seed": seed})

    return Dataset(
        ids=np.arange(n, dtype=np.int64),
        months=months,
        groups=np.full(n, GROUP_CODE_A, dtype=np.int8),
        true_labels=labels,
        observed_labels=labels.copy(),
        features=features,
        n_months=n_months,
        prevalence=n_pos / n,
    )


def attach_protected(ds: Dataset, group_share_A: float, seed: int, allow_degenerate: bool = False) -> Dataset:
    """
    保護属性を付与

    各行のグループを Bernoulli(group_share_A) で独立に決める。
    特徴量・ラベル・月は一切参照しない。

    Args:
        ds (Dataset): 対象データセット
        group_share_A (float): グループAの割合
        seed (int): 乱数シード
        allow_degenerate (bool): 0 / 1 の割合を許可するか

    Returns:
        Dataset: グループ列を付与したデータセット

    Raises:
        EmptyOrDegenerateConfig: データセットが空
        DegenerateGroupShare: 割合が (0,1) の範囲外
    """
    if ds.n_instances == 0:
        raise EmptyOrDegenerateConfig("空のデータセットには保護属性を付与できません")
    in_open = 0.0 < group_share_A < 1.0
    in_closed = group_share_A in (0.0, 1.0)
    if not (in_open or (allow_degenerate and in_closed)):
        raise DegenerateGroupShare(f"group_share_A={group_share_A} は (0,1) の範囲外です")

    rng = make_rng(seed)
    draws = rng.random(ds.n_instances)
    groups = np.where(draws < group_share_A, GROUP_CODE_A, GROUP_CODE_B).astype(np.int8)

    entry = ProvenanceEntry(
        condition=Condition.GROUP_INDEPENDENCE,
        params={"group_share_A": float(group_share_A), "seed": int(seed)},
    )
    log_simulation_debug("保護属性付与", {"share_A": group_share_A, "count_A": int((groups == GROUP_CODE_A).sum())})
    return ds.evolve(
        groups=groups,
        provenance=ds.with_provenance(entry, drop=(Condition.GROUP_INDEPENDENCE, Condition.PREVALENCE_DISPARITY)),
    )

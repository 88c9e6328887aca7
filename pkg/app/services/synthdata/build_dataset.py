"""
バイアス付き合成データセットの構築サービス

BiasSpec に宣言された条件を、保護属性 → 有病率格差 → クラス条件付き分布
→ ノイズラベル → 動的シフト の順に注入します。
"""
from typing import Optional

from app.schemas.schemas import BaseDataConfig, BiasSpec
from app.services.shared.exceptions import PerfloopError, SynthDataError
from app.services.shared.logging_utils import log_simulation_info
from app.services.shared.seeding import derive_seed
from app.services.synthdata.core.dataset import Dataset
from app.services.synthdata.core.generator_engine import attach_protected, gen_base
from app.services.synthdata.core.injection_engine import (
    apply_dynamic_shift,
    inject_class_conditional_bias,
    inject_noisy_labels,
    inject_prevalence_disparity,
)

# 注入ステップごとの乱数ストリーム番号
STREAM_BASE = 0
STREAM_GROUPS = 1
STREAM_PREVALENCE = 2
STREAM_CONDITIONAL = 3
STREAM_NOISE = 4
STREAM_SHIFT = 5


def build_base_dataset(base: BaseDataConfig, seed: int) -> Dataset:
    return gen_base(base.n, base.prevalence, base.d, base.n_months, derive_seed(seed, STREAM_BASE))


def apply_bias_spec(ds: Dataset, bias: BiasSpec, seed: int) -> Dataset:
    """
    既存のデータセットに BiasSpec の各条件を順に注入

    Args:
        ds (Dataset): 基本データセット
        bias (BiasSpec): 注入するバイアス条件
        seed (int): 乱数シード（各ステップのシードはここから派生）

    Returns:
        Dataset: バイアス注入後のデータセット
    """
    ds = attach_protected(
        ds,
        bias.group_share_A,
        derive_seed(seed, STREAM_GROUPS),
        allow_degenerate=bias.allow_degenerate_share,
    )
    if bias.prevalence_multiplier_c != 1.0:
        ds = inject_prevalence_disparity(
            ds, bias.prevalence_multiplier_c, derive_seed(seed, STREAM_PREVALENCE), months=bias.prevalence_months
        )
    components = bias.component_map()
    if components is not None:
        ds = inject_class_conditional_bias(ds, components, derive_seed(seed, STREAM_CONDITIONAL))
    if bias.noisy_labels is not None:
        noise = bias.noisy_labels
        ds = inject_noisy_labels(
            ds,
            noise.mode,
            noise.target_multiplier,
            noise.affected_group,
            derive_seed(seed, STREAM_NOISE),
            months=noise.months,
        )
    if bias.dynamic_shift is not None and bias.dynamic_shift.shift_months:
        ds = apply_dynamic_shift(ds, bias.dynamic_shift, derive_seed(seed, STREAM_SHIFT))
    return ds


def build_biased_dataset(base: BaseDataConfig, bias: Optional[BiasSpec], seed: int) -> Dataset:
    """
    基本データセットを生成し、バイアス条件を注入する

    Args:
        base (BaseDataConfig): 行数・有病率・次元・月数
        bias (Optional[BiasSpec]): 注入するバイアス（None なら保護属性も付与しない）
        seed (int): 乱数シード

    Returns:
        Dataset: 構築したデータセット

    Raises:
        SynthDataError: 生成・注入に失敗した場合
    """
    try:
        log_simulation_info(f"データセット構築を開始 (n={base.n}, seed={seed})")
        ds = build_base_dataset(base, seed)
        if bias is None:
            return ds
        return apply_bias_spec(ds, bias, seed)
    except PerfloopError:
        raise
    except Exception as e:
        raise SynthDataError(f"データセット構築中にエラーが発生しました: {e}") from e

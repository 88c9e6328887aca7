"""
2つのシナリオの既定設定
"""
from app.schemas.schemas import BiasSpec, DynamicShiftSpec, Group, LabelGroupComponent
from app.services.synthdata.config.synthdata_config import SEPARABILITY_COMPONENTS

# ---------------------------------------------------------------------------
# シナリオ1（不正者の適応による分布シフト）
# ---------------------------------------------------------------------------

# 末尾の何か月をテストに使うか
SCENARIO1_TEST_MONTHS = 2

# 実務者が「本番に選ぶ」上位モデル数
TOP_K = 5

# 行動を変えるグループ（既定の分布では分離可能な側）
SCENARIO1_ADAPTED_GROUP = Group.B

# ---------------------------------------------------------------------------
# シナリオ2（選択的ラベルによるノイズの蓄積）
# ---------------------------------------------------------------------------

N_ITERATIONS = 4
INITIAL_TRAIN_MONTHS = 3
# 学習 3か月 + 検証 1か月 + テスト 1か月を 4 回スライドする
MIN_SCENARIO2_MONTHS = INITIAL_TRAIN_MONTHS + N_ITERATIONS + 1

# グループAは不正率2倍・サイズはBの1/4
SCENARIO2_GROUP_SHARE_A = 0.2
SCENARIO2_PREVALENCE_MULTIPLIER = 2.0

# override 使用時の config_id
OVERRIDE_CONFIG_ID = -1

# 乱数ストリーム番号
STREAM_DATASET = 10
STREAM_CONFIGS = 11
STREAM_SHIFT = 12
STREAM_CONDITIONAL = 13


def scenario1_test_months(n_months: int) -> list:
    return list(range(n_months - SCENARIO1_TEST_MONTHS, n_months))


def default_scenario1_bias(n_months: int) -> BiasSpec:
    """グループサイズ・不正率が等しく、x1, x2 だけがグループ間で異なる設定"""
    return BiasSpec(
        group_share_A=0.5,
        prevalence_multiplier_c=1.0,
        cond_dist=[
            LabelGroupComponent(label=label, group=group, component=component)
            for (label, group), component in sorted(SEPARABILITY_COMPONENTS.items())
        ],
        dynamic_shift=DynamicShiftSpec(
            adapted_group=SCENARIO1_ADAPTED_GROUP,
            shift_months=scenario1_test_months(n_months),
        ),
    )


def default_scenario2_bias() -> BiasSpec:
    return BiasSpec(
        group_share_A=SCENARIO2_GROUP_SHARE_A,
        prevalence_multiplier_c=SCENARIO2_PREVALENCE_MULTIPLIER,
    )

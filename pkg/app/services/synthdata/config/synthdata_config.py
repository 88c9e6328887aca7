"""
合成データ生成・バイアス注入の設定値
"""
# グループ指標の評価に必要な最小正例数
MIN_POSITIVES = 10

# 2つのクラス条件付き球面正規分布の平均間マハラノビス距離。
# 最適線形スコアで TPR@5%FPR = Phi(delta - 1.645) ≈ 0.5 になる。
BASE_MEAN_SEPARATION = 1.65

# 保護グループの符号化
GROUP_CODE_A = 0
GROUP_CODE_B = 1
GROUP_NAMES = ("A", "B")

# 注入比率の相対許容誤差
RATIO_TOLERANCE = 0.05

# 検証の既定有意水準
DEFAULT_ALPHA = 0.01

# x1, x2 の既定パラメータ:
#   グループB はラベル0/1の3σ領域が交わらない（分離可能）
#   グループA はラベル0/1で同一分布（分離不可能）
SEPARABILITY_COMPONENTS = {
    (0, "A"): {"mean": (0.0, 0.0), "cov": ((1.0, 0.0), (0.0, 1.0))},
    (1, "A"): {"mean": (0.0, 0.0), "cov": ((1.0, 0.0), (0.0, 1.0))},
    (0, "B"): {"mean": (0.0, 0.0), "cov": ((0.25, 0.0), (0.0, 0.25))},
    (1, "B"): {"mean": (3.0, 3.0), "cov": ((0.25, 0.0), (0.0, 0.25))},
}

# データセットCSVの固定列
ID_COLUMN = "id"
MONTH_COLUMN = "month"
GROUP_COLUMN = "group"
TRUE_LABEL_COLUMN = "true_label"
OBSERVED_LABEL_COLUMN = "observed_label"
PROVENANCE_SUFFIX = ".provenance.json"


def feature_column_name(index: int) -> str:
    return f"f{index}"

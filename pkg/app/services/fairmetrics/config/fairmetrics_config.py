"""
公平性指標の設定値
"""
import math

# 80%ルール: FPR比が [0.8, 1.25] に収まれば予測平等性を満たす
PREDICTIVE_EQUALITY_BAND = math.log2(1.25)

# 浮動小数点の丸めで帯の境界を誤判定しないための余裕
BAND_EPSILON = 1e-12

# 比の分子・分母（A / B）
RATIO_NUMERATOR = "A"
RATIO_DENOMINATOR = "B"

# 全体行のグループ名
OVERALL_GROUP = "all"

# 指標エクスポートの列
METRICS_EXPORT_COLUMNS = [
    "scenario",
    "iteration",
    "seed",
    "policy",
    "label_source",
    "group",
    "tp",
    "fp",
    "tn",
    "fn",
    "tpr",
    "fpr",
    "fnr",
    "precision",
    "log2_fpr_ratio",
    "log2_fnr_ratio",
]

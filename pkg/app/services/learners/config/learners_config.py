"""
学習器の設定値とハイパーパラメータ空間の既定値
"""

# ModelConfig の制約
MAX_GBDT_DEPTH = 4
MAX_GBDT_ROUNDS = 500

# 既定ハイパーパラメータ（未指定キーの補完に使う）
DEFAULT_LOGREG_HYPERPARAMS = {
    "learning_rate": 0.1,
    "l2": 1e-4,
    "max_iters": 500,
}

DEFAULT_GBDT_HYPERPARAMS = {
    "rounds": 100,
    "max_depth": 3,
    "learning_rate": 0.1,
    "min_leaf": 20,
}

# ランダムサーチの既定空間
DEFAULT_LOGREG_SPACE = {
    "learning_rate": {"low": 1e-3, "high": 1.0, "scale": "log"},
    "l2": {"low": 1e-6, "high": 1.0, "scale": "log"},
    "max_iters": {"low": 100, "high": 2000, "scale": "int"},
}

DEFAULT_GBDT_SPACE = {
    "rounds": {"low": 20, "high": 300, "scale": "int"},
    "max_depth": {"low": 1, "high": 3, "scale": "choice", "choices": [1, 2, 3]},
    "learning_rate": {"low": 0.02, "high": 0.4, "scale": "log"},
    "min_leaf": {"low": 5, "high": 200, "scale": "int"},
}

# Newton ステップの分母に加える微小量
HESSIAN_EPSILON = 1e-12

# 損失が増加した場合に葉の値を半減させる最大回数
MAX_STEP_HALVINGS = 30

# 分割ゲインの下限
MIN_SPLIT_GAIN = 1e-12

# 保護属性の符号化（グループBを1とする単一指示列）
GROUP_INDICATOR_NAME = "group_is_B"

# 手法の置き換えに関する記録（マニフェストへ出力）
DEVIATION_RANDOM_SEARCH = "TPE hyperparameter optimization replaced by uniform random search over the same space"
DEVIATION_GBDT = "LightGBM replaced by in-repo gradient-boosted regression trees (exact greedy splits, Newton leaves)"

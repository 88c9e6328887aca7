"""
閾値決定の設定値
"""

# スコアの上限。最大スコアがこれ未満なら番兵閾値にこの値を使う
SCORE_UPPER_BOUND = 1.0

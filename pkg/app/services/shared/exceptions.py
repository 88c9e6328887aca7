"""
カスタム例外クラスの定義
"""


class PerfloopError(Exception):
    """シミュレーター全体の基底例外クラス"""
    pass


# ---------------------------------------------------------------------------
# synthdata
# ---------------------------------------------------------------------------

class SynthDataError(PerfloopError):
    """合成データ生成・バイアス注入関連のエラー"""
    pass


class EmptyOrDegenerateConfig(SynthDataError):
    """行数0・特徴量次元不足など、生成設定が退化している"""
    pass


class InsufficientPositives(SynthDataError):
    """グループ指標を評価するには正例が少なすぎる"""
    pass


class DegenerateGroupShare(SynthDataError):
    """グループAの割合が (0,1) の範囲外"""
    pass


class GroupsNotAttached(SynthDataError):
    """保護属性がまだ付与されていない"""
    pass


class InfeasibleDisparity(SynthDataError):
    """指定された有病率比をグループ再割当てで実現できない"""
    pass


class InvalidCovariance(SynthDataError):
    """共分散行列が対称正定値ではない"""
    pass


class InfeasibleNoiseTarget(SynthDataError):
    """反転可能な行が足りずノイズ目標に到達できない"""
    pass


class MissingConditionalFeatures(SynthDataError):
    """クラス条件付き特徴量 x1, x2 が存在しない"""
    pass


class InvalidShiftWindow(SynthDataError):
    """シフト対象の月が [0, M-1] の範囲外"""
    pass


class ProvenanceMismatch(SynthDataError):
    """来歴に宣言された条件に必要な列が存在しない"""
    pass


# ---------------------------------------------------------------------------
# learners
# ---------------------------------------------------------------------------

class LearnerError(PerfloopError):
    """モデル学習・推論関連のエラー"""
    pass


class DegenerateLabels(LearnerError):
    """学習データの観測ラベルが単一クラスのみ"""
    pass


class DivergedTraining(LearnerError):
    """損失が非有限値になった（学習率が大きすぎる）"""
    pass


class DegenerateSplitConfig(LearnerError):
    """min_leaf がデータ件数を超えている"""
    pass


class FeatureLayoutMismatch(LearnerError):
    """モデルの特徴量レイアウトとデータセットが一致しない"""
    pass


class EmptySpace(LearnerError):
    """ハイパーパラメータ空間が空"""
    pass


# ---------------------------------------------------------------------------
# decision
# ---------------------------------------------------------------------------

class DecisionError(PerfloopError):
    """閾値決定関連のエラー"""
    pass


class NoNegativesForFPR(DecisionError):
    """負例が無いためFPRを計算できない"""
    pass


class NoNegativesForGroup(DecisionError):
    """特定グループに負例が無い"""

    def __init__(self, group: str):
        super().__init__(f"グループ {group} に負例がありません")
        self.group = group


class MissingGroups(DecisionError):
    """グループ別閾値の適用にグループ列が必要"""
    pass


# ---------------------------------------------------------------------------
# fairmetrics
# ---------------------------------------------------------------------------

class MetricsError(PerfloopError):
    """公平性指標計算関連のエラー"""
    pass


class LengthMismatch(MetricsError):
    """判定・ラベル・グループの長さが一致しない"""
    pass


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

class ScenarioError(PerfloopError):
    """シナリオ実行関連のエラー"""
    pass


class InsufficientTimeline(ScenarioError):
    """スライディングウィンドウに必要な月数が足りない"""
    pass


class InvalidScenarioConfig(ScenarioError):
    """シナリオの前提条件を満たさない設定"""
    pass


# ---------------------------------------------------------------------------
# runner
# ---------------------------------------------------------------------------

class RunnerError(PerfloopError):
    """実験ランナー関連のエラー"""
    pass


class ConfigError(RunnerError):
    """実験設定ファイルが不正"""
    pass


class SchemaMismatch(RunnerError):
    """集計対象レポートのスキーマが揃っていない"""
    pass

import math
from enum import Enum
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, field_validator, model_validator

from app.services.learners.config.learners_config import (
    DEFAULT_GBDT_HYPERPARAMS,
    DEFAULT_LOGREG_HYPERPARAMS,
    MAX_GBDT_DEPTH,
    MAX_GBDT_ROUNDS,
)


class Group(str, Enum):
    A = "A"
    B = "B"


class Algorithm(str, Enum):
    LOGREG = "logreg"
    GBDT = "gbdt"


class NoiseMode(str, Enum):
    INFLATE = "inflate"
    EQUALIZE = "equalize"


class Condition(str, Enum):
    GROUP_INDEPENDENCE = "group_independence"
    PREVALENCE_DISPARITY = "prevalence_disparity"
    CLASS_CONDITIONAL = "class_conditional"
    NOISY_LABELS = "noisy_labels"
    DYNAMIC_SHIFT = "dynamic_shift"


class PolicyKind(str, Enum):
    GLOBAL = "global"
    GROUPWISE = "groupwise"


class LabelSource(str, Enum):
    TRUE_LABELS = "true_labels"
    OBSERVED_LABELS = "observed_labels"


class ScenarioName(str, Enum):
    SCENARIO1 = "scenario1"
    SCENARIO2 = "scenario2"


class World(str, Enum):
    PERFORMANCE_IDEAL = "performance_ideal"
    ADAPTATION = "adaptation"
    UNBIASED_BASELINE = "unbiased_baseline"


class LedgerAction(str, Enum):
    RELABELED_POSITIVE = "relabeled_positive"
    REVEALED = "revealed"


# ---------------------------------------------------------------------------
# バイアス仕様
# ---------------------------------------------------------------------------

class GaussianComponent(BaseModel):
    mean: Tuple[float, float] = Field(..., description="2次元正規分布の平均")
    cov: Tuple[Tuple[float, float], Tuple[float, float]] = Field(..., description="2x2共分散行列")


class LabelGroupComponent(BaseModel):
    label: Literal[0, 1] = Field(..., description="真のラベル")
    group: Group = Field(..., description="保護グループ")
    component: GaussianComponent = Field(..., description="(label, group) に対応する正規分布")


class NoisyLabelsSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: NoiseMode = Field(NoiseMode.INFLATE, description="inflate: 0→1 反転, equalize: 1→0 反転")
    target_multiplier: PositiveFloat = Field(1.0, description="観測有病率比（影響グループ／他グループ）の目標値")
    affected_group: Group = Field(Group.A, description="ノイズを受けるグループ")
    months: Optional[List[int]] = Field(None, description="注入対象の月（未指定なら全期間）")


class DynamicShiftSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    adapted_group: Group = Field(Group.B, description="行動を変えるグループ")
    shift_months: List[int] = Field(default_factory=list, description="シフトが発生する月のリスト（空ならシフトなし）")
    post_shift_components: Optional[Dict[int, GaussianComponent]] = Field(
        None,
        description="シフト後にラベル別に使う分布（未指定ならシフト前のラベル0分布を両ラベルに使う）",
    )

    @field_validator("shift_months")
    @classmethod
    def normalize_months(cls, v):
        if any(m < 0 for m in v):
            raise ValueError("shift_months に負の月は指定できません")
        return sorted(set(v))


class BiasSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    group_share_A: float = Field(0.5, description="グループAの割合 P[Z=A]")
    allow_degenerate_share: bool = Field(False, description="group_share_A に 0/1 を許可するか")
    prevalence_multiplier_c: PositiveFloat = Field(1.0, description="P[Y=1|Z=A] / P[Y=1|Z=B]")
    prevalence_months: Optional[List[int]] = Field(None, description="有病率格差を注入する月（未指定なら全期間）")
    cond_dist: Optional[List[LabelGroupComponent]] = Field(None, description="クラス条件付き分布（4成分）")
    noisy_labels: Optional[NoisyLabelsSpec] = Field(None, description="ノイズラベルの注入設定")
    dynamic_shift: Optional[DynamicShiftSpec] = Field(None, description="動的バイアス（分布シフト）の設定")

    @field_validator("group_share_A")
    @classmethod
    def check_share_range(cls, v):
        if not 0.0 <= v <= 1.0:
            raise ValueError("group_share_A は [0, 1] の範囲で指定してください")
        return v

    @model_validator(mode="after")
    def check_share_degenerate(self):
        if self.group_share_A in (0.0, 1.0) and not self.allow_degenerate_share:
            raise ValueError("group_share_A に 0 または 1 を使う場合は allow_degenerate_share を指定してください")
        return self

    def component_map(self) -> Optional[Dict[Tuple[int, Group], GaussianComponent]]:
        if self.cond_dist is None:
            return None
        return {(entry.label, entry.group): entry.component for entry in self.cond_dist}


class ProvenanceEntry(BaseModel):
    condition: Condition = Field(..., description="注入されたバイアス条件")
    params: Dict[str, Any] = Field(default_factory=dict, description="注入時のパラメータ")


class VerificationEntry(BaseModel):
    condition: Condition
    test: str = Field(..., description="使用した検定")
    statistic: float = Field(..., description="検定統計量")
    p_value: Optional[float] = Field(None, description="p値（計数監査の場合はNone）")
    rejected: Optional[bool] = Field(None, description="帰無仮説を棄却したか")
    passed: bool = Field(..., description="宣言された条件と実データが一致するか")
    detail: Dict[str, Any] = Field(default_factory=dict)


class BiasVerificationReport(BaseModel):
    alpha: float
    entries: List[VerificationEntry] = Field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(entry.passed for entry in self.entries)

    def entry(self, condition: Condition) -> VerificationEntry:
        for e in self.entries:
            if e.condition == condition:
                return e
        raise KeyError(condition.value)


# ---------------------------------------------------------------------------
# 学習器
# ---------------------------------------------------------------------------

class ModelConfig(BaseModel):
    config_id: int = Field(0, description="試行ID")
    algorithm: Algorithm = Field(Algorithm.GBDT)
    awareness: bool = Field(False, description="保護属性を特徴量に含めるか")
    hyperparams: Dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def fill_and_check_hyperparams(self):
        defaults = DEFAULT_LOGREG_HYPERPARAMS if self.algorithm == Algorithm.LOGREG else DEFAULT_GBDT_HYPERPARAMS
        unknown = set(self.hyperparams) - set(defaults)
        if unknown:
            raise ValueError(f"{self.algorithm.value} に存在しないハイパーパラメータ: {sorted(unknown)}")
        merged = {**defaults, **self.hyperparams}

        # 整数のパラメータは切り捨ててから検証する
        integer_keys = ("rounds", "max_depth", "min_leaf") if self.algorithm == Algorithm.GBDT else ("max_iters",)
        for key in integer_keys:
            if not math.isfinite(merged[key]):
                raise ValueError(f"{key} は有限の値で指定してください")
            merged[key] = int(merged[key])

        # 反復回数 0 は「学習しない」モデルとして許可する
        for key in ("max_iters", "rounds"):
            if key in merged and merged[key] < 0:
                raise ValueError(f"{key} は0以上で指定してください")
        for key in ("learning_rate", "l2", "max_depth", "min_leaf"):
            if key in merged and merged[key] <= 0:
                raise ValueError(f"{key} は正の値で指定してください")
        if self.algorithm == Algorithm.GBDT:
            if merged["max_depth"] > MAX_GBDT_DEPTH:
                raise ValueError(f"max_depth は {MAX_GBDT_DEPTH} 以下で指定してください")
            if merged["rounds"] > MAX_GBDT_ROUNDS:
                raise ValueError(f"rounds は {MAX_GBDT_ROUNDS} 以下で指定してください")
        self.hyperparams = merged
        return self


class ParamRange(BaseModel):
    low: float
    high: float
    scale: Literal["log", "uniform", "int", "choice"] = "uniform"
    choices: Optional[List[float]] = None

    @model_validator(mode="after")
    def check_range(self):
        if self.scale == "choice":
            if not self.choices:
                raise ValueError("choice には choices が必要です")
            return self
        if self.low > self.high:
            raise ValueError("low は high 以下で指定してください")
        if self.scale == "log" and self.low <= 0:
            raise ValueError("対数一様分布の下限は正の値が必要です")
        return self


class HyperparamSpace(BaseModel):
    model_config = ConfigDict(extra="forbid")

    algorithm: Algorithm = Field(Algorithm.GBDT)
    awareness: bool = Field(False, description="生成する設定の awareness")
    ranges: Dict[str, ParamRange] = Field(default_factory=dict)


# ---------------------------------------------------------------------------
# 閾値
# ---------------------------------------------------------------------------

class ThresholdPolicy(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: PolicyKind = Field(PolicyKind.GLOBAL)
    target_fpr: float = Field(0.05, gt=0.0, lt=1.0, description="目標FPR")


class FittedThresholds(BaseModel):
    kind: PolicyKind
    target_fpr: float
    global_cutoff: Optional[float] = Field(None, description="全体閾値（score >= cutoff で陽性判定）")
    group_cutoffs: Dict[str, float] = Field(default_factory=dict, description="グループ別閾値")
    achieved_fpr: Optional[float] = Field(None, description="フィッティング集合上の全体FPR")
    achieved_tpr: Optional[float] = Field(None, description="フィッティング集合上の全体TPR")
    group_achieved_fpr: Dict[str, float] = Field(default_factory=dict)
    group_achieved_tpr: Dict[str, Optional[float]] = Field(default_factory=dict)


# ---------------------------------------------------------------------------
# 公平性指標
# ---------------------------------------------------------------------------

class ConfusionCounts(BaseModel):
    tp: int = Field(0, ge=0)
    fp: int = Field(0, ge=0)
    tn: int = Field(0, ge=0)
    fn: int = Field(0, ge=0)

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def negatives(self) -> int:
        return self.fp + self.tn


class GroupConfusion(BaseModel):
    overall: ConfusionCounts
    by_group: Dict[str, ConfusionCounts]


class GroupRates(BaseModel):
    tpr: Optional[float] = None
    fpr: Optional[float] = None
    fnr: Optional[float] = None
    precision: Optional[float] = None


class Log2Ratio(BaseModel):
    value: Optional[float] = Field(None, description="log2(A/B)。未定義ならNone")
    defined: bool = Field(False)


class MetricsReport(BaseModel):
    evaluated_against: LabelSource
    overall: GroupRates
    by_group: Dict[str, GroupRates]
    counts: GroupConfusion
    log2_fpr_ratio: Log2Ratio
    log2_fnr_ratio: Log2Ratio
    log2_precision_ratio: Log2Ratio
    predictive_equality_pass: bool


# ---------------------------------------------------------------------------
# シナリオ
# ---------------------------------------------------------------------------

class TrialResult(BaseModel):
    config_id: int
    tpr: float = Field(..., description="テスト集合上の TPR@目標FPR")
    cutoff: float
    log2_fpr_ratio: Log2Ratio
    group_fpr: Dict[str, Optional[float]] = Field(default_factory=dict)
    group_tpr: Dict[str, Optional[float]] = Field(default_factory=dict)


class WorldResult(BaseModel):
    world: World
    trials: List[TrialResult]
    top_ids: List[int] = Field(..., description="テストTPR上位5件の config_id")

    def trial(self, config_id: int) -> TrialResult:
        for t in self.trials:
            if t.config_id == config_id:
                return t
        raise KeyError(config_id)


class Scenario1Report(BaseModel):
    seed: int
    shift_enabled: bool
    target_fpr: float
    configs: List[ModelConfig]
    worlds: Dict[str, WorldResult]
    believed_top_ids: List[int] = Field(..., description="performance_ideal 上位5件（adaptation でも評価される）")


class IterationRecord(BaseModel):
    iteration: int
    train_months: List[int]
    validation_month: int
    test_month: int
    chosen_config_id: int
    validation_selection_tpr: float
    thresholds: FittedThresholds
    perceived: MetricsReport = Field(..., description="ノイズ入り検証集合（観測ラベル）での指標")
    real: MetricsReport = Field(..., description="テスト集合（真のラベル）での指標")
    perceived_group_fpr: Dict[str, Optional[float]]
    real_group_fpr: Dict[str, Optional[float]]
    perceived_tpr: Optional[float]
    real_tpr: Optional[float]


class LedgerEntry(BaseModel):
    iteration: int
    month: int
    relabeled_positive_ids: List[int]
    revealed_ids: List[int]
    true_positive_count: int = Field(..., description="スライス内の真の正例数")
    false_positive_count: int = Field(..., description="スコアリングモデルの偽陽性数")
    observed_positive_count: int
    observed_prevalence: Dict[str, Optional[float]]
    true_prevalence: Dict[str, Optional[float]]


class FeedbackLedger(BaseModel):
    entries: List[LedgerEntry] = Field(default_factory=list)


class Scenario2Report(BaseModel):
    seed: int
    policy: ThresholdPolicy
    drop_old: bool
    iterations: List[IterationRecord]
    ledger: FeedbackLedger


# ---------------------------------------------------------------------------
# ランナー
# ---------------------------------------------------------------------------

class BaseDataConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: int = Field(50_000, gt=0, description="行数")
    prevalence: float = Field(0.01, gt=0.0, lt=1.0, description="不正率")
    d: int = Field(8, ge=2, description="基本特徴量の次元")
    n_months: int = Field(8, ge=2, description="月数 M")


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenario: ScenarioName = Field(ScenarioName.SCENARIO2)
    base: BaseDataConfig = Field(default_factory=BaseDataConfig)
    bias: Optional[BiasSpec] = Field(None, description="未指定ならシナリオ既定のバイアス")
    algorithm: Algorithm = Field(Algorithm.GBDT, description="space 未指定時に使う既定空間のアルゴリズム")
    awareness: bool = Field(False)
    space: Optional[HyperparamSpace] = Field(None, description="ハイパーパラメータ空間の上書き")
    n_trials: int = Field(50, ge=1)
    policy: ThresholdPolicy = Field(default_factory=ThresholdPolicy)
    drop_old: bool = Field(False)
    seeds: List[int] = Field(default_factory=lambda: list(range(1, 11)))
    alpha: float = Field(0.01, gt=0.0, lt=1.0, description="バイアス検証の有意水準")
    output_dir: str = Field("output")

    @field_validator("seeds")
    @classmethod
    def check_seeds(cls, v):
        if not v:
            raise ValueError("seeds は1件以上必要です")
        if len(set(v)) != len(v):
            raise ValueError("seeds に重複があります")
        if any(s < 0 for s in v):
            raise ValueError("seeds は0以上の整数で指定してください")
        return v


class RunManifest(BaseModel):
    config_hash: str
    tool_version: str
    scenario: str
    seeds: List[int]
    files: Dict[str, List[str]] = Field(default_factory=dict, description="シードごとの出力ファイル")
    stage_seconds: Dict[str, float] = Field(default_factory=dict)
    deviations: List[str] = Field(default_factory=list)
    awareness: bool = False

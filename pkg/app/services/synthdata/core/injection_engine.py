"""
バイアス条件の注入エンジン
"""
import math
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from app.schemas.schemas import (
    Condition,
    DynamicShiftSpec,
    GaussianComponent,
    Group,
    NoiseMode,
    ProvenanceEntry,
)
from app.services.shared.exceptions import (
    EmptyOrDegenerateConfig,
    GroupsNotAttached,
    InfeasibleDisparity,
    InfeasibleNoiseTarget,
    InvalidCovariance,
    InvalidShiftWindow,
    MissingConditionalFeatures,
    ProvenanceMismatch,
)
from app.services.shared.logging_utils import log_simulation_debug
from app.services.shared.seeding import make_rng
from app.services.synthdata.config.synthdata_config import (
    GROUP_CODE_A,
    GROUP_CODE_B,
    GROUP_NAMES,
    RATIO_TOLERANCE,
)
from app.services.synthdata.core.dataset import Dataset

ComponentKey = Tuple[int, Union[Group, str]]


def _group_name(group: Union[Group, str]) -> str:
    return group.value if isinstance(group, Group) else str(group)


def _group_code(group: Union[Group, str]) -> int:
    return GROUP_CODE_A if _group_name(group) == GROUP_NAMES[0] else GROUP_CODE_B


def _require_groups(ds: Dataset, operation: str) -> None:
    if not ds.groups_attached:
        raise GroupsNotAttached(f"{operation} の前に attach_protected を実行してください")


def _scope_mask(ds: Dataset, months: Optional[Sequence[int]]) -> np.ndarray:
    if months is None:
        return np.ones(ds.n_instances, dtype=bool)
    return np.isin(ds.months, np.asarray(list(months), dtype=np.int64))


def _relative_gap(achieved: float, target: float) -> float:
    return abs(achieved / target - 1.0)


def check_component(component: GaussianComponent) -> Tuple[np.ndarray, np.ndarray]:
    """
    正規分布成分を検証し、平均とコレスキー因子を返す

    Raises:
        InvalidCovariance: 共分散が対称正定値でない
    """
    mean = np.asarray(component.mean, dtype=np.float64)
    cov = np.asarray(component.cov, dtype=np.float64)
    if cov.shape != (2, 2) or not np.allclose(cov, cov.T):
        raise InvalidCovariance(f"共分散行列が対称ではありません: {component.cov}")
    if np.any(np.linalg.eigvalsh(cov) <= 0.0):
        raise InvalidCovariance(f"共分散行列が正定値ではありません: {component.cov}")
    return mean, np.linalg.cholesky(cov)


def _draw(rng: np.random.Generator, component: GaussianComponent, size: int) -> np.ndarray:
    mean, chol = check_component(component)
    return rng.standard_normal((size, 2)) @ chol.T + mean


def _components_to_params(components: Mapping[Tuple[int, str], GaussianComponent]) -> list:
    return [
        {"label": int(label), "group": group, "component": components[(label, group)].model_dump(mode="json")}
        for label, group in sorted(components)
    ]


def components_from_provenance(ds: Dataset) -> Dict[Tuple[int, str], GaussianComponent]:
    entries = ds.provenance_entries(Condition.CLASS_CONDITIONAL)
    if not entries:
        raise ProvenanceMismatch("クラス条件付きバイアスの来歴がありません")
    return {
        (int(item["label"]), str(item["group"])): GaussianComponent.model_validate(item["component"])
        for item in entries[-1].params["components"]
    }


def inject_prevalence_disparity(
    ds: Dataset,
    c: float,
    seed: int,
    months: Optional[Sequence[int]] = None,
) -> Dataset:
    """
    グループ所属の再割当てで有病率格差を注入

    ラベルは変更せず、P[Y=1|Z=A] = c * P[Y=1|Z=B] となるように正例・負例の
    グループを割り当て直す。グループサイズと全体の有病率は厳密に保存される。

    Args:
        ds (Dataset): 保護属性付きデータセット
        c (float): 目標の有病率比 (A/B)
        seed (int): 乱数シード
        months (Optional[Sequence[int]]): 対象月（未指定なら全期間）

    Returns:
        Dataset: グループ列のみ変更したデータセット（c=1 なら入力そのもの）

    Raises:
        GroupsNotAttached: 保護属性が未付与
        InfeasibleDisparity: c をグループ再割当てで実現できない
    """
    _require_groups(ds, "inject_prevalence_disparity")
    if c <= 0:
        raise InfeasibleDisparity(f"c は正の値で指定してください: {c}")
    if c == 1.0:
        return ds

    scope = _scope_mask(ds, months)
    in_a = scope & (ds.groups == GROUP_CODE_A)
    n_a = int(in_a.sum())
    n_b = int((scope & (ds.groups == GROUP_CODE_B)).sum())
    positives = np.flatnonzero(scope & (ds.true_labels == 1))
    negatives = np.flatnonzero(scope & (ds.true_labels == 0))
    total_pos = positives.size

    if n_a == 0 or n_b == 0:
        raise InfeasibleDisparity("両グループに1件以上の行が必要です")

    k_a = int(math.floor(c * total_pos * n_a / (n_b + c * n_a) + 0.5))
    k_b = total_pos - k_a
    if k_a <= 0 or k_b <= 0 or k_a > n_a or k_b > n_b:
        raise InfeasibleDisparity(
            f"c={c} は実現できません (正例 {total_pos} 件, |A|={n_a}, |B|={n_b}, k_A={k_a})"
        )
    achieved = (k_a / n_a) / (k_b / n_b)
    if _relative_gap(achieved, c) > RATIO_TOLERANCE:
        raise InfeasibleDisparity(f"c={c} に対し達成可能な比は {achieved:.3f} です")

    rng = make_rng(seed)
    groups = ds.groups.copy()
    shuffled_pos = rng.permutation(positives)
    shuffled_neg = rng.permutation(negatives)
    groups[shuffled_pos[:k_a]] = GROUP_CODE_A
    groups[shuffled_pos[k_a:]] = GROUP_CODE_B
    groups[shuffled_neg[: n_a - k_a]] = GROUP_CODE_A
    groups[shuffled_neg[n_a - k_a:]] = GROUP_CODE_B

    share_entries = ds.provenance_entries(Condition.GROUP_INDEPENDENCE)
    params = {
        "c": float(c),
        "seed": int(seed),
        "months": list(months) if months is not None else None,
        "achieved_ratio": achieved,
    }
    if share_entries:
        params["group_share_A"] = share_entries[-1].params.get("group_share_A")

    log_simulation_debug("有病率格差の注入", {"c": c, "k_A": k_a, "k_B": k_b, "achieved": round(achieved, 4)})
    return ds.evolve(
        groups=groups,
        provenance=ds.with_provenance(
            ProvenanceEntry(condition=Condition.PREVALENCE_DISPARITY, params=params),
            drop=(Condition.GROUP_INDEPENDENCE,),
        ),
    )


def inject_class_conditional_bias(
    ds: Dataset,
    components: Mapping[ComponentKey, GaussianComponent],
    seed: int,
) -> Dataset:
    """
    グループ別クラス条件付き分布バイアスを注入

    (真のラベル, グループ) ごとの2次元正規分布から x1, x2 を生成して特徴量に追加する。

    Args:
        ds (Dataset): 保護属性付きデータセット
        components (Mapping): (label, group) -> GaussianComponent の4成分
        seed (int): 乱数シード

    Returns:
        Dataset: 特徴量が2列増えたデータセット

    Raises:
        GroupsNotAttached: 保護属性が未付与
        InvalidCovariance: 正定値でない共分散
    """
    _require_groups(ds, "inject_class_conditional_bias")
    normalized = {(int(label), _group_name(group)): comp for (label, group), comp in components.items()}
    expected = {(label, group) for label in (0, 1) for group in GROUP_NAMES}
    if set(normalized) != expected:
        raise EmptyOrDegenerateConfig(f"(label, group) の4成分が必要です: {sorted(normalized)}")
    for comp in normalized.values():
        check_component(comp)

    rng = make_rng(seed)
    appended = np.zeros((ds.n_instances, 2), dtype=np.float64)
    for label, group in sorted(expected):
        rows = np.flatnonzero((ds.true_labels == label) & (ds.groups == _group_code(group)))
        appended[rows] = _draw(rng, normalized[(label, group)], rows.size)

    if ds.conditional_columns is not None:
        features = ds.features.copy()
        features[:, list(ds.conditional_columns)] = appended
        columns = ds.conditional_columns
    else:
        features = np.hstack([ds.features, appended])
        columns = (ds.d, ds.d + 1)

    entry = ProvenanceEntry(
        condition=Condition.CLASS_CONDITIONAL,
        params={"components": _components_to_params(normalized), "seed": int(seed)},
    )
    log_simulation_debug("クラス条件付きバイアスの注入", {"columns": columns, "seed": seed})
    return ds.evolve(
        features=features,
        conditional_columns=columns,
        provenance=ds.with_provenance(entry, drop=(Condition.CLASS_CONDITIONAL, Condition.DYNAMIC_SHIFT)),
    )


def noisy_flip_count(
    mode: NoiseMode,
    target_multiplier: float,
    k_affected: int,
    n_affected: int,
    k_other: int,
    n_other: int,
) -> int:
    """
    目標の観測有病率比に必要な反転数を計算

    現在の比がすでに許容誤差内であれば0を返す。

    Raises:
        InfeasibleNoiseTarget: 反転の向きでは目標に到達できない
    """
    if n_affected == 0 or n_other == 0 or k_other == 0:
        raise InfeasibleNoiseTarget("両グループに観測正例が必要です")
    target = target_multiplier if mode == NoiseMode.INFLATE else 1.0
    current = (k_affected / n_affected) / (k_other / n_other)
    if _relative_gap(current, target) <= RATIO_TOLERANCE:
        return 0
    if mode == NoiseMode.INFLATE:
        if current > target:
            raise InfeasibleNoiseTarget(f"inflate では比 {current:.3f} を {target} まで下げられません")
        return int(math.floor(target * k_other * n_affected / n_other - k_affected + 0.5))
    if current < target:
        raise InfeasibleNoiseTarget(f"equalize では比 {current:.3f} を 1 まで上げられません")
    return int(math.floor(k_affected - k_other * n_affected / n_other + 0.5))


def inject_noisy_labels(
    ds: Dataset,
    mode: Union[NoiseMode, str],
    target_multiplier: float,
    affected_group: Union[Group, str],
    seed: int,
    months: Optional[Sequence[int]] = None,
) -> Dataset:
    """
    観測ラベルにノイズを注入

    inflate は影響グループの負例を 0→1、equalize は影響グループの正例を 1→0 に
    一様非復元抽出で反転する。真のラベルは変更しない。

    Args:
        ds (Dataset): 保護属性付きデータセット
        mode (NoiseMode): inflate / equalize
        target_multiplier (float): inflate 時の観測有病率比（影響／他）の目標
        affected_group (Group): ノイズを受けるグループ
        seed (int): 乱数シード
        months (Optional[Sequence[int]]): 対象月（未指定なら全期間）

    Returns:
        Dataset: 観測ラベルのみ変更したデータセット

    Raises:
        GroupsNotAttached: 保護属性が未付与
        InfeasibleNoiseTarget: 反転可能な行が足りない
    """
    _require_groups(ds, "inject_noisy_labels")
    mode = NoiseMode(mode)
    affected_name = _group_name(affected_group)
    scope = _scope_mask(ds, months)
    affected = scope & (ds.groups == _group_code(affected_name))
    other = scope & (ds.groups != _group_code(affected_name))
    observed = ds.observed_labels

    flips = noisy_flip_count(
        mode,
        target_multiplier,
        k_affected=int(observed[affected].sum()),
        n_affected=int(affected.sum()),
        k_other=int(observed[other].sum()),
        n_other=int(other.sum()),
    )

    if mode == NoiseMode.INFLATE:
        eligible = np.flatnonzero(affected & (observed == 0) & (ds.true_labels == 0))
        new_value = 1
    else:
        eligible = np.flatnonzero(affected & (observed == 1) & (ds.true_labels == 1))
        new_value = 0
    if flips > eligible.size:
        raise InfeasibleNoiseTarget(f"反転に {flips} 行必要ですが対象は {eligible.size} 行です")

    rng = make_rng(seed)
    chosen = np.sort(rng.choice(eligible, size=flips, replace=False)) if flips else np.array([], dtype=np.int64)
    new_observed = observed.copy()
    new_observed[chosen] = new_value

    target = target_multiplier if mode == NoiseMode.INFLATE else 1.0
    k_a = int(new_observed[affected].sum())
    k_o = int(new_observed[other].sum())
    achieved = (k_a / int(affected.sum())) / (k_o / int(other.sum()))
    if _relative_gap(achieved, target) > RATIO_TOLERANCE:
        raise InfeasibleNoiseTarget(f"反転後の比 {achieved:.3f} が目標 {target} の許容誤差外です")

    entry = ProvenanceEntry(
        condition=Condition.NOISY_LABELS,
        params={
            "mode": mode.value,
            "target_multiplier": float(target),
            "affected_group": affected_name,
            "months": list(months) if months is not None else None,
            "flips": int(flips),
            "flipped_ids": [int(i) for i in ds.ids[chosen]],
            "achieved_ratio": achieved,
            "seed": int(seed),
        },
    )
    log_simulation_debug("ノイズラベルの注入", {"mode": mode.value, "flips": flips, "achieved": round(achieved, 4)})
    return ds.evolve(observed_labels=new_observed, provenance=ds.provenance + (entry,))


def apply_dynamic_shift(ds: Dataset, shift: DynamicShiftSpec, seed: int) -> Dataset:
    """
    動的バイアス（分布シフト）を適用

    対象グループかつ対象月の行について、x1, x2 をラベル別のシフト後分布から
    引き直す。既定ではシフト前のラベル0分布を両ラベルに使い、x1, x2 は
    そのグループで無情報になる。それ以外の行は変更しない。

    Args:
        ds (Dataset): x1, x2 を持つデータセット
        shift (DynamicShiftSpec): シフト設定
        seed (int): 乱数シード

    Returns:
        Dataset: シフト後のデータセット（対象月が空なら入力そのもの）

    Raises:
        MissingConditionalFeatures: x1, x2 が無い
        InvalidShiftWindow: 対象月が [0, M-1] の範囲外
    """
    if not shift.shift_months:
        return ds
    if ds.conditional_columns is None:
        raise MissingConditionalFeatures("apply_dynamic_shift には x1, x2 が必要です")
    if min(shift.shift_months) < 0 or max(shift.shift_months) >= ds.n_months:
        raise InvalidShiftWindow(f"shift_months {shift.shift_months} が [0, {ds.n_months - 1}] の範囲外です")

    adapted = _group_name(shift.adapted_group)
    if shift.post_shift_components is not None:
        post = {int(label): comp for label, comp in shift.post_shift_components.items()}
    else:
        legit = components_from_provenance(ds)[(0, adapted)]
        post = {0: legit, 1: legit}
    if set(post) != {0, 1}:
        raise EmptyOrDegenerateConfig("post_shift_components にはラベル0と1の成分が必要です")

    rng = make_rng(seed)
    in_window = (ds.groups == _group_code(adapted)) & np.isin(ds.months, np.asarray(shift.shift_months, dtype=np.int64))
    features = ds.features.copy()
    columns = list(ds.conditional_columns)
    for label in (0, 1):
        rows = np.flatnonzero(in_window & (ds.true_labels == label))
        features[np.ix_(rows, columns)] = _draw(rng, post[label], rows.size)

    entry = ProvenanceEntry(
        condition=Condition.DYNAMIC_SHIFT,
        params={
            "adapted_group": adapted,
            "shift_months": list(shift.shift_months),
            "post_shift_components": {str(k): v.model_dump(mode="json") for k, v in sorted(post.items())},
            "seed": int(seed),
        },
    )
    log_simulation_debug("動的シフトの適用", {"group": adapted, "months": shift.shift_months, "rows": int(in_window.sum())})
    return ds.evolve(
        features=features,
        provenance=ds.with_provenance(entry, drop=(Condition.DYNAMIC_SHIFT,)),
    )

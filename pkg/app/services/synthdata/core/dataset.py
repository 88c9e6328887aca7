"""
合成データセットの値オブジェクトとCSV入出力
"""
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from app.schemas.schemas import Condition, ProvenanceEntry
from app.services.shared.exceptions import ProvenanceMismatch
from app.services.shared.output_file import load_output_file, save_output_file, save_output_frame
from app.services.synthdata.config.synthdata_config import (
    GROUP_CODE_A,
    GROUP_CODE_B,
    GROUP_COLUMN,
    GROUP_NAMES,
    ID_COLUMN,
    MONTH_COLUMN,
    OBSERVED_LABEL_COLUMN,
    PROVENANCE_SUFFIX,
    TRUE_LABEL_COLUMN,
    feature_column_name,
)


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    不変なデータセット

    列ごとに numpy 配列で保持し、すべて書き込み禁止にする。
    バイアス注入などの操作は常に新しい Dataset を返す。
    """
    ids: np.ndarray
    months: np.ndarray
    groups: np.ndarray
    true_labels: np.ndarray
    observed_labels: np.ndarray
    features: np.ndarray
    n_months: int
    prevalence: float
    provenance: Tuple[ProvenanceEntry, ...] = ()
    conditional_columns: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        for name in ("ids", "months", "groups", "true_labels", "observed_labels", "features"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    # ------------------------------------------------------------------
    # 基本情報
    # ------------------------------------------------------------------

    @property
    def n_instances(self) -> int:
        return int(self.ids.shape[0])

    @property
    def d(self) -> int:
        return int(self.features.shape[1])

    def __len__(self) -> int:
        return self.n_instances

    def has_condition(self, condition: Condition) -> bool:
        return any(entry.condition == condition for entry in self.provenance)

    def provenance_entries(self, condition: Condition) -> List[ProvenanceEntry]:
        return [entry for entry in self.provenance if entry.condition == condition]

    @property
    def groups_attached(self) -> bool:
        return self.has_condition(Condition.GROUP_INDEPENDENCE) or self.has_condition(Condition.PREVALENCE_DISPARITY)

    def group_mask(self, group: str) -> np.ndarray:
        code = GROUP_CODE_A if group == GROUP_NAMES[0] else GROUP_CODE_B
        return self.groups == code

    def group_labels(self) -> np.ndarray:
        """グループを 'A' / 'B' の文字列配列で返す"""
        return np.where(self.groups == GROUP_CODE_A, GROUP_NAMES[0], GROUP_NAMES[1])

    # ------------------------------------------------------------------
    # 派生データセット
    # ------------------------------------------------------------------

    def evolve(self, **changes) -> "Dataset":
        return replace(self, **changes)

    def with_provenance(self, entry: ProvenanceEntry, drop: Sequence[Condition] = ()) -> Tuple[ProvenanceEntry, ...]:
        kept = tuple(e for e in self.provenance if e.condition not in drop)
        return kept + (entry,)

    def subset(self, mask: np.ndarray) -> "Dataset":
        """行マスクで部分集合を取り出す（来歴はそのまま引き継ぐ）"""
        return replace(
            self,
            ids=self.ids[mask],
            months=self.months[mask],
            groups=self.groups[mask],
            true_labels=self.true_labels[mask],
            observed_labels=self.observed_labels[mask],
            features=self.features[mask],
        )

    def months_subset(self, months: Sequence[int]) -> "Dataset":
        return self.subset(np.isin(self.months, np.asarray(list(months), dtype=np.int64)))

    def equals(self, other: "Dataset") -> bool:
        """全列と来歴が完全一致するか"""
        return (
            self.n_months == other.n_months
            and self.conditional_columns == other.conditional_columns
            and self.provenance == other.provenance
            and np.array_equal(self.ids, other.ids)
            and np.array_equal(self.months, other.months)
            and np.array_equal(self.groups, other.groups)
            and np.array_equal(self.true_labels, other.true_labels)
            and np.array_equal(self.observed_labels, other.observed_labels)
            and self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
        )

    # ------------------------------------------------------------------
    # シリアライズ
    # ------------------------------------------------------------------

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({
            ID_COLUMN: self.ids,
            MONTH_COLUMN: self.months,
            GROUP_COLUMN: self.group_labels(),
            TRUE_LABEL_COLUMN: self.true_labels,
            OBSERVED_LABEL_COLUMN: self.observed_labels,
        })
        for j in range(self.d):
            frame[feature_column_name(j)] = self.features[:, j]
        return frame

    @classmethod
    def from_frame(
        cls,
        frame: pd.DataFrame,
        n_months: int,
        provenance: Sequence[ProvenanceEntry] = (),
        conditional_columns: Optional[Tuple[int, int]] = None,
    ) -> "Dataset":
        feature_names = [c for c in frame.columns if c.startswith("f") and c[1:].isdigit()]
        feature_names.sort(key=lambda c: int(c[1:]))
        true_labels = frame[TRUE_LABEL_COLUMN].to_numpy(dtype=np.int8)
        return cls(
            ids=frame[ID_COLUMN].to_numpy(dtype=np.int64),
            months=frame[MONTH_COLUMN].to_numpy(dtype=np.int64),
            groups=np.where(frame[GROUP_COLUMN].astype(str).to_numpy() == GROUP_NAMES[0], GROUP_CODE_A, GROUP_CODE_B).astype(np.int8),
            true_labels=true_labels,
            observed_labels=frame[OBSERVED_LABEL_COLUMN].to_numpy(dtype=np.int8),
            features=frame[feature_names].to_numpy(dtype=np.float64),
            n_months=int(n_months),
            prevalence=float(true_labels.mean()) if len(true_labels) else 0.0,
            provenance=tuple(provenance),
            conditional_columns=conditional_columns,
        )


def save_dataset(ds: Dataset, path: Union[str, Path]) -> List[Path]:
    """
    データセットをCSVと来歴JSONとして保存

    Args:
        ds (Dataset): 保存するデータセット
        path (Union[str, Path]): CSVの出力先

    Returns:
        List[Path]: 書き出したファイルのパス
    """
    path = Path(path)
    csv_path = save_output_frame(ds.to_frame(), path)
    sidecar = save_output_file(
        {
            "n_months": ds.n_months,
            "prevalence": ds.prevalence,
            "conditional_columns": list(ds.conditional_columns) if ds.conditional_columns else None,
            "provenance": [entry.model_dump(mode="json") for entry in ds.provenance],
        },
        path.with_name(path.name + PROVENANCE_SUFFIX),
    )
    return [csv_path, sidecar]


def load_dataset(path: Union[str, Path]) -> Dataset:
    """
    save_dataset で保存したデータセットを読み込む

    Raises:
        ProvenanceMismatch: 来歴ファイルの列情報がCSVと矛盾する場合
    """
    path = Path(path)
    frame = pd.read_csv(path, float_precision="round_trip")
    sidecar_path = path.with_name(path.name + PROVENANCE_SUFFIX)
    if sidecar_path.exists():
        meta = load_output_file(sidecar_path)
    else:
        meta = {"n_months": int(frame[MONTH_COLUMN].max()) + 1, "conditional_columns": None, "provenance": []}
    conditional = meta.get("conditional_columns")
    ds = Dataset.from_frame(
        frame,
        n_months=meta["n_months"],
        provenance=[ProvenanceEntry.model_validate(e) for e in meta.get("provenance", [])],
        conditional_columns=tuple(conditional) if conditional else None,
    )
    if ds.conditional_columns and max(ds.conditional_columns) >= ds.d:
        raise ProvenanceMismatch(f"条件付き特徴量の列 {ds.conditional_columns} がCSVに存在しません (d={ds.d})")
    return ds

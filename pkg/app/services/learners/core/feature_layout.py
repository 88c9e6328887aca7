"""
モデル入力の特徴量レイアウト
"""
from dataclasses import dataclass
from typing import Any, Dict

import numpy as np

from app.services.learners.config.learners_config import GROUP_INDICATOR_NAME
from app.services.shared.exceptions import FeatureLayoutMismatch
from app.services.synthdata.config.synthdata_config import GROUP_CODE_B
from app.services.synthdata.core.dataset import Dataset


@dataclass(frozen=True)
class FeatureLayout:
    """
    学習時の列構成

    n_features はデータセットの特徴量列数。awareness が真なら
    グループBを1とする指示列を末尾に追加する。
    """
    n_features: int
    awareness: bool

    @classmethod
    def for_dataset(cls, ds: Dataset, awareness: bool) -> "FeatureLayout":
        return cls(n_features=ds.d, awareness=awareness)

    @property
    def width(self) -> int:
        return self.n_features + (1 if self.awareness else 0)

    def column_names(self) -> list:
        names = [f"f{j}" for j in range(self.n_features)]
        if self.awareness:
            names.append(GROUP_INDICATOR_NAME)
        return names

    def matrix(self, ds: Dataset) -> np.ndarray:
        """
        データセットからモデル入力行列を作成

        Raises:
            FeatureLayoutMismatch: 特徴量列数が学習時と異なる
        """
        if ds.d != self.n_features:
            raise FeatureLayoutMismatch(f"特徴量数が一致しません (モデル: {self.n_features}, データ: {ds.d})")
        if not self.awareness:
            return np.asarray(ds.features, dtype=np.float64)
        indicator = (ds.groups == GROUP_CODE_B).astype(np.float64)[:, None]
        return np.hstack([ds.features, indicator])

    def to_dict(self) -> Dict[str, Any]:
        return {"n_features": self.n_features, "awareness": self.awareness, "columns": self.column_names()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "FeatureLayout":
        return cls(n_features=int(data["n_features"]), awareness=bool(data["awareness"]))

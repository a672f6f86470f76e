"""Design-matrix construction for the tree models.

Numeric features pass through with NaN for missing; coordinates and the
transaction date (as an ordinal day) are optional columns; categoricals are
one-hot encoded for levels seen at least ``onehot_min_count`` times in
training, everything rarer or unseen maps to all-zeros.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..dataset import PropertyRecord

LAT_NAME = "lat"
LON_NAME = "lon"
DATE_NAME = "date"


@dataclass
class FeatureEncoder:
    numeric_names: list[str]
    categorical_names: list[str] = field(default_factory=list)
    include_coordinates: bool = True
    include_date: bool = True
    onehot_min_count: int = 10
    levels_: dict[str, list[str]] = field(default_factory=dict)
    feature_names: list[str] = field(default_factory=list)

    def fit(self, records: Sequence[PropertyRecord]) -> "FeatureEncoder":
        self.levels_ = {}
        for name in self.categorical_names:
            counts = Counter(
                r.categoricals[name] for r in records if name in r.categoricals
            )
            self.levels_[name] = sorted(
                level for level, n in counts.items() if n >= self.onehot_min_count
            )
        self.feature_names = list(self.numeric_names)
        if self.include_coordinates:
            self.feature_names += [LAT_NAME, LON_NAME]
        if self.include_date:
            self.feature_names.append(DATE_NAME)
        for name in self.categorical_names:
            self.feature_names += [f"{name}={level}" for level in self.levels_[name]]
        return self

    def transform(self, records: Sequence[PropertyRecord]) -> np.ndarray:
        if not self.feature_names:
            raise RuntimeError("encoder not fitted")
        X = np.full((len(records), len(self.feature_names)), np.nan)
        col = 0
        for j, name in enumerate(self.numeric_names):
            for i, r in enumerate(records):
                v = r.features.get(name)
                X[i, j] = np.nan if v is None else float(v)
        col = len(self.numeric_names)
        if self.include_coordinates:
            X[:, col] = [r.lat for r in records]
            X[:, col + 1] = [r.lon for r in records]
            col += 2
        if self.include_date:
            X[:, col] = [r.date.toordinal() for r in records]
            col += 1
        for name in self.categorical_names:
            for level in self.levels_[name]:
                X[:, col] = [1.0 if r.categoricals.get(name) == level else 0.0 for r in records]
                col += 1
        return X

    def coordinate_columns(self) -> list[int]:
        if not self.include_coordinates:
            return []
        base = len(self.numeric_names)
        return [base, base + 1]

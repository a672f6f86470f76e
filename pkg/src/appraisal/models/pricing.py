"""Price models over property records: encoding, log-target handling, persistence."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..dataset import Dataset, PropertyRecord
from .encoding import FeatureEncoder
from .gbt import GbtParams, GbtRegressor


@dataclass
class GbtPriceModel:
    """A fitted boosted-tree price model plus everything needed to reuse it.

    Prices are heavy-tailed, so the trees fit log(price) by default and
    predictions invert the transform. ``stats_digest`` fingerprints the
    training rows so a reloaded model can be matched to its data.
    """

    regressor: GbtRegressor
    encoder: FeatureEncoder
    log_target: bool
    stats_digest: str

    def predict_records(self, records: Sequence[PropertyRecord]) -> np.ndarray:
        return self.predict_matrix(self.encoder.transform(records))

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        raw = self.regressor.predict(X)
        return np.exp(raw) if self.log_target else raw

    @property
    def feature_names(self) -> list[str]:
        return self.encoder.feature_names

    def save(self, path: str | Path) -> None:
        payload = {
            "version": 1,
            "log_target": self.log_target,
            "stats_digest": self.stats_digest,
            "encoder": {
                "numeric_names": self.encoder.numeric_names,
                "categorical_names": self.encoder.categorical_names,
                "include_coordinates": self.encoder.include_coordinates,
                "include_date": self.encoder.include_date,
                "onehot_min_count": self.encoder.onehot_min_count,
                "levels": self.encoder.levels_,
                "feature_names": self.encoder.feature_names,
            },
            "regressor": self.regressor.to_dict(),
        }
        Path(path).write_text(json.dumps(payload), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "GbtPriceModel":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        if raw.get("version") != 1:
            raise ValueError(f"unsupported price model version {raw.get('version')!r}")
        enc_raw = raw["encoder"]
        encoder = FeatureEncoder(
            numeric_names=enc_raw["numeric_names"],
            categorical_names=enc_raw["categorical_names"],
            include_coordinates=enc_raw["include_coordinates"],
            include_date=enc_raw["include_date"],
            onehot_min_count=enc_raw["onehot_min_count"],
        )
        encoder.levels_ = enc_raw["levels"]
        encoder.feature_names = enc_raw["feature_names"]
        return cls(
            regressor=GbtRegressor.from_dict(raw["regressor"]),
            encoder=encoder,
            log_target=raw["log_target"],
            stats_digest=raw["stats_digest"],
        )


def _digest(records: Sequence[PropertyRecord]) -> str:
    blob = json.dumps([(r.id, r.price) for r in records]).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def fit_gbt_price_model(
    ds: Dataset,
    train_records: Sequence[PropertyRecord],
    *,
    include_coordinates: bool = True,
    log_target: bool = True,
    params: GbtParams | None = None,
) -> GbtPriceModel:
    encoder = FeatureEncoder(
        numeric_names=ds.numeric_feature_names(),
        categorical_names=ds.categorical_feature_names(),
        include_coordinates=include_coordinates,
    ).fit(train_records)
    X = encoder.transform(train_records)
    y = np.array([r.price for r in train_records], dtype=float)
    target = np.log(y) if log_target else y
    regressor = GbtRegressor(params).fit(X, target)
    return GbtPriceModel(
        regressor=regressor,
        encoder=encoder,
        log_target=log_target,
        stats_digest=_digest(train_records),
    )

"""Shared fixtures: synthetic housing data shaped like a small regional market."""
from __future__ import annotations

import datetime as dt

import numpy as np
import pytest

from appraisal.dataset import (
    Dataset,
    DatasetConfig,
    FeatureSpec,
    PropertyRecord,
    Provenance,
)

BASE_DATE = dt.date(2015, 1, 1)


def synth_config(name: str = "synthville") -> DatasetConfig:
    return DatasetConfig(
        name=name,
        currency="USD",
        region="Synthville, USA",
        price_column="price",
        date_column="date",
        lat_column="lat",
        lon_column="lon",
        id_column="id",
        features=(
            FeatureSpec(name="sqft_living", kind="numeric", unit="sqft"),
            FeatureSpec(name="bedrooms", kind="numeric"),
            FeatureSpec(name="bathrooms", kind="numeric"),
            FeatureSpec(name="grade", kind="numeric"),
            FeatureSpec(name="condition", kind="categorical"),
        ),
    )


def synth_records(n: int, seed: int = 0, currency: str = "USD") -> list[PropertyRecord]:
    """Generate records with spatial price structure and integer prices.

    Price rises with living area, grade, and proximity to a town center, so
    both geographic and hedonic neighbors carry real signal.
    """
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n):
        lat = 47.3 + rng.uniform(0, 0.4)
        lon = -122.5 + rng.uniform(0, 0.4)
        sqft = float(rng.integers(500, 4000))
        beds = float(rng.integers(1, 6))
        baths = float(rng.integers(1, 4))
        grade = float(rng.integers(3, 13))
        center_dist = np.hypot(lat - 47.5, lon + 122.3)
        price = (
            120 * sqft
            + 25000 * grade
            + 15000 * beds
            - 400000 * center_dist
            + rng.normal(0, 20000)
        )
        price = int(max(price, 50000))
        records.append(
            PropertyRecord(
                id=f"r{i:05d}",
                features={
                    "sqft_living": sqft,
                    "bedrooms": beds,
                    "bathrooms": baths,
                    "grade": grade,
                },
                categoricals={"condition": rng.choice(["fair", "good", "excellent"])},
                lat=float(lat),
                lon=float(lon),
                date=BASE_DATE + dt.timedelta(days=int(rng.integers(0, 365))),
                price=float(price),
                currency=currency,
            )
        )
    return records


def synth_dataset(n: int = 200, seed: int = 0, name: str = "synthville") -> Dataset:
    config = synth_config(name)
    schema = config.features + (
        FeatureSpec(name="lat", kind="coordinate"),
        FeatureSpec(name="lon", kind="coordinate"),
        FeatureSpec(name="date", kind="date"),
    )
    return Dataset(
        name=name,
        currency="USD",
        region="Synthville, USA",
        schema=schema,
        records=tuple(synth_records(n, seed=seed)),
        provenance=Provenance(source="synthetic", rows_read=n),
    )


def records_to_csv(records: list[PropertyRecord], path) -> None:
    lines = ["id,date,price,lat,lon,sqft_living,bedrooms,bathrooms,grade,condition"]
    for r in records:
        lines.append(
            f"{r.id},{r.date.isoformat()},{r.price:.0f},{r.lat},{r.lon},"
            f"{r.features['sqft_living']:.0f},{r.features['bedrooms']:.0f},"
            f"{r.features['bathrooms']:.0f},{r.features['grade']:.0f},"
            f"{r.categoricals.get('condition', '')}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_config_toml(path, name: str = "synthville") -> None:
    path.write_text(
        f"""
name = "{name}"
currency = "USD"
region = "Synthville, USA"
date_format = "iso"
id_column = "id"
price_column = "price"
date_column = "date"
lat_column = "lat"
lon_column = "lon"

[[features]]
name = "sqft_living"
kind = "numeric"
unit = "sqft"

[[features]]
name = "bedrooms"
kind = "numeric"

[[features]]
name = "bathrooms"
kind = "numeric"

[[features]]
name = "grade"
kind = "numeric"

[[features]]
name = "condition"
kind = "categorical"
""",
        encoding="utf-8",
    )


@pytest.fixture
def small_dataset() -> Dataset:
    return synth_dataset(n=60, seed=7)


@pytest.fixture
def medium_dataset() -> Dataset:
    return synth_dataset(n=400, seed=11)

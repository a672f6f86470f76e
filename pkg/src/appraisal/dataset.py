"""Housing dataset ingestion, validation, deterministic splits, and train statistics.

Datasets arrive as UTF-8 delimited text with a header row. Column meaning is
declared in a per-dataset TOML config so the engine never hard-codes column
names. Rejected rows are reported, never silently dropped.
"""
from __future__ import annotations

import csv
import datetime as dt
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

FEATURE_KINDS = ("numeric", "categorical", "coordinate", "date")

TRAIN_FRACTION = 0.6
VALIDATION_FRACTION = 0.2


class DatasetError(Exception):
    """Unrecoverable dataset problem (unreadable file, bad config, bad split)."""


class SchemaError(DatasetError):
    """Config/file mismatch: missing columns, unknown kinds, bad declarations."""


@dataclass(frozen=True)
class FeatureSpec:
    """One schema entry: a named column with a kind and an optional unit."""

    name: str
    kind: str
    unit: str = ""
    column: str = ""

    def __post_init__(self):
        if self.kind not in FEATURE_KINDS:
            raise SchemaError(f"unknown feature kind {self.kind!r} for {self.name!r}")
        if not self.column:
            object.__setattr__(self, "column", self.name)


@dataclass(frozen=True)
class DatasetConfig:
    """Declarative mapping from source columns to the engine's schema."""

    name: str
    currency: str
    region: str
    price_column: str
    date_column: str
    lat_column: str
    lon_column: str
    features: tuple[FeatureSpec, ...]
    date_format: str = "iso"
    id_column: str = ""
    address_column: str = ""

    @classmethod
    def load(cls, path: str | Path) -> "DatasetConfig":
        path = Path(path)
        try:
            raw = tomllib.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise DatasetError(f"cannot read dataset config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise SchemaError(f"invalid TOML in {path}: {exc}") from exc
        try:
            features = tuple(
                FeatureSpec(
                    name=f["name"],
                    kind=f.get("kind", "numeric"),
                    unit=f.get("unit", ""),
                    column=f.get("column", ""),
                )
                for f in raw.get("features", [])
            )
            return cls(
                name=raw["name"],
                currency=raw["currency"],
                region=raw.get("region", ""),
                price_column=raw["price_column"],
                date_column=raw["date_column"],
                lat_column=raw["lat_column"],
                lon_column=raw["lon_column"],
                features=features,
                date_format=raw.get("date_format", "iso"),
                id_column=raw.get("id_column", ""),
                address_column=raw.get("address_column", ""),
            )
        except KeyError as exc:
            raise SchemaError(f"dataset config {path} is missing key {exc}") from exc

    def required_columns(self) -> list[str]:
        cols = [self.price_column, self.date_column, self.lat_column, self.lon_column]
        cols += [f.column for f in self.features]
        if self.id_column:
            cols.append(self.id_column)
        if self.address_column:
            cols.append(self.address_column)
        return cols

    def parse_date(self, text: str) -> dt.date:
        if self.date_format == "iso":
            return dt.date.fromisoformat(text)
        return dt.datetime.strptime(text, self.date_format).date()


@dataclass(frozen=True)
class PropertyRecord:
    """One property: hedonic features, location, date, and (for known sales) price.

    ``features`` maps numeric feature names to values; ``None`` marks a missing
    value. ``price`` is ``None`` for appraisal subjects whose price is unknown;
    ingested dataset rows always carry a strictly positive price.
    """

    id: str
    features: dict[str, float | None]
    categoricals: dict[str, str]
    lat: float
    lon: float
    date: dt.date
    price: float | None
    currency: str
    address: str = ""


@dataclass(frozen=True)
class Provenance:
    source: str
    rows_read: int


@dataclass(frozen=True)
class Dataset:
    """An immutable, schema-consistent collection of property records."""

    name: str
    currency: str
    region: str
    schema: tuple[FeatureSpec, ...]
    records: tuple[PropertyRecord, ...]
    provenance: Provenance

    def __len__(self) -> int:
        return len(self.records)

    @property
    def variables(self) -> list[str]:
        """Schema names in declared order (what the feature prompts refer to)."""
        return [f.name for f in self.schema]

    def numeric_feature_names(self) -> list[str]:
        return [f.name for f in self.schema if f.kind == "numeric"]

    def categorical_feature_names(self) -> list[str]:
        return [f.name for f in self.schema if f.kind == "categorical"]


@dataclass(frozen=True)
class RowError:
    row: int
    record_id: str
    reason: str


@dataclass(frozen=True)
class IngestReport:
    accepted: int
    rejected: tuple[RowError, ...]

    @property
    def n_rejected(self) -> int:
        return len(self.rejected)


def _parse_float(text: str, column: str) -> float | None:
    text = text.strip()
    if not text or text.upper() in ("NA", "NAN", "NULL", "NONE"):
        return None
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"non-numeric value {text!r} in column {column!r}")


def ingest(path: str | Path, config: DatasetConfig) -> tuple[Dataset, IngestReport]:
    """Read a delimited file into a Dataset, rejecting invalid rows with reasons.

    Rejection reasons: missing/non-positive price, malformed or out-of-range
    coordinates, malformed dates or numeric features, duplicate record ids.
    An unreadable file or a header that lacks configured columns raises.
    """
    path = Path(path)
    try:
        handle = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc

    records: list[PropertyRecord] = []
    errors: list[RowError] = []
    seen_ids: set[str] = set()
    rows_read = 0
    with handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        missing = [c for c in config.required_columns() if c not in header]
        if missing:
            raise SchemaError(f"{path} is missing configured columns: {missing}")
        for row_no, row in enumerate(reader, start=2):
            rows_read += 1
            rid = row[config.id_column].strip() if config.id_column else str(row_no - 1)
            try:
                record = _build_record(row, rid, config)
            except ValueError as exc:
                errors.append(RowError(row=row_no, record_id=rid, reason=str(exc)))
                continue
            if record.id in seen_ids:
                errors.append(RowError(row=row_no, record_id=rid, reason="duplicate record id"))
                continue
            seen_ids.add(record.id)
            records.append(record)

    schema = config.features + (
        FeatureSpec(name=config.lat_column, kind="coordinate", column=config.lat_column),
        FeatureSpec(name=config.lon_column, kind="coordinate", column=config.lon_column),
        FeatureSpec(name=config.date_column, kind="date", column=config.date_column),
    )
    ds = Dataset(
        name=config.name,
        currency=config.currency,
        region=config.region,
        schema=schema,
        records=tuple(records),
        provenance=Provenance(source=str(path), rows_read=rows_read),
    )
    return ds, IngestReport(accepted=len(records), rejected=tuple(errors))


def _build_record(row: dict[str, str], rid: str, config: DatasetConfig) -> PropertyRecord:
    price = _parse_float(row[config.price_column], config.price_column)
    if price is None:
        raise ValueError("missing price")
    if price <= 0:
        raise ValueError(f"non-positive price {price}")

    lat = _parse_float(row[config.lat_column], config.lat_column)
    lon = _parse_float(row[config.lon_column], config.lon_column)
    if lat is None or lon is None:
        raise ValueError("missing coordinates")
    if not (-90.0 <= lat <= 90.0):
        raise ValueError(f"latitude {lat} outside [-90, 90]")
    if not (-180.0 <= lon <= 180.0):
        raise ValueError(f"longitude {lon} outside [-180, 180]")

    try:
        date = config.parse_date(row[config.date_column].strip())
    except ValueError:
        raise ValueError(f"malformed date {row[config.date_column]!r}")

    features: dict[str, float | None] = {}
    categoricals: dict[str, str] = {}
    for spec in config.features:
        raw = row[spec.column]
        if spec.kind == "numeric":
            features[spec.name] = _parse_float(raw, spec.column)
        elif spec.kind == "categorical":
            label = raw.strip()
            if label:
                categoricals[spec.name] = label
        else:
            raise ValueError(f"feature {spec.name!r} has non-ingestable kind {spec.kind!r}")

    address = row[config.address_column].strip() if config.address_column else ""
    return PropertyRecord(
        id=rid,
        features=features,
        categoricals=categoricals,
        lat=lat,
        lon=lon,
        date=date,
        price=price,
        currency=config.currency,
        address=address,
    )


@dataclass(frozen=True)
class DataSplit:
    """Disjoint train/validation/test index partitions of a dataset.

    Indices are kept in split order: shuffled order for random splits,
    time order for chronological splits (so residual windows stay sequential).
    """

    train: tuple[int, ...]
    validation: tuple[int, ...]
    test: tuple[int, ...]
    seed: int
    ordering: str

    def parts(self) -> dict[str, tuple[int, ...]]:
        return {"train": self.train, "validation": self.validation, "test": self.test}


def split(ds: Dataset, seed: int = 0, ordering: str = "random") -> DataSplit:
    """Partition record indices 60:20:20 (within one record of exact).

    ``random`` shuffles with the seed; ``chronological`` sorts by (date, id)
    and cuts, so the test part holds the latest dates.
    """
    n = len(ds)
    if n < 5:
        raise DatasetError(f"need at least 5 records to split, got {n}")
    if ordering == "random":
        order = np.random.default_rng(seed).permutation(n).tolist()
    elif ordering == "chronological":
        order = sorted(range(n), key=lambda i: (ds.records[i].date, ds.records[i].id))
    else:
        raise DatasetError(f"unknown split ordering {ordering!r}")

    n_train = round(n * TRAIN_FRACTION)
    n_val = round(n * VALIDATION_FRACTION)
    return DataSplit(
        train=tuple(order[:n_train]),
        validation=tuple(order[n_train : n_train + n_val]),
        test=tuple(order[n_train + n_val :]),
        seed=seed,
        ordering=ordering,
    )


@dataclass(frozen=True)
class TrainStats:
    """Per-feature summary statistics computed on the training part only.

    Standard deviations are population (ddof=0); medians average the two
    central values for even counts. Features whose training values are all
    missing get zeroed statistics and are listed in ``flagged``.
    """

    means: dict[str, float]
    stds: dict[str, float]
    medians: dict[str, float]
    price_min: float
    price_max: float
    price_median: float
    n_train: int
    flagged: tuple[str, ...] = ()


def train_stats(ds: Dataset, data_split: DataSplit) -> TrainStats:
    if not data_split.train:
        raise DatasetError("training part is empty")
    train_records = [ds.records[i] for i in data_split.train]
    means: dict[str, float] = {}
    stds: dict[str, float] = {}
    medians: dict[str, float] = {}
    flagged: list[str] = []
    for name in ds.numeric_feature_names():
        values = np.array(
            [r.features[name] for r in train_records if r.features.get(name) is not None],
            dtype=float,
        )
        if values.size == 0:
            means[name] = stds[name] = medians[name] = 0.0
            flagged.append(name)
            continue
        means[name] = float(values.mean())
        stds[name] = float(values.std())
        medians[name] = float(np.median(values))

    prices = np.array([r.price for r in train_records], dtype=float)
    return TrainStats(
        means=means,
        stds=stds,
        medians=medians,
        price_min=float(prices.min()),
        price_max=float(prices.max()),
        price_median=float(np.median(prices)),
        n_train=len(train_records),
        flagged=tuple(flagged),
    )


def sample_test(data_split: DataSplit, n: int, seed: int = 0) -> tuple[int, ...]:
    """Choose a deterministic subset of the test indices (n records, seeded)."""
    test = data_split.test
    if n > len(test):
        raise DatasetError(f"cannot sample {n} from test part of {len(test)}")
    if n == len(test):
        return tuple(test)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(test), size=n, replace=False)
    return tuple(test[i] for i in sorted(chosen.tolist()))

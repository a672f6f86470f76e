import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from appraisal.dataset import (
    DataSplit,
    Dataset,
    DatasetConfig,
    DatasetError,
    SchemaError,
    ingest,
    sample_test,
    split,
    train_stats,
)

from .conftest import records_to_csv, synth_dataset, synth_records, write_config_toml

HEADER = "id,date,price,lat,lon,sqft_living,bedrooms,bathrooms,grade,condition"


@pytest.fixture
def config(tmp_path) -> DatasetConfig:
    cfg = tmp_path / "dataset.toml"
    write_config_toml(cfg)
    return DatasetConfig.load(cfg)


def test_ingest_round_trip(tmp_path, config):
    records = synth_records(20, seed=3)
    csv_path = tmp_path / "data.csv"
    records_to_csv(records, csv_path)
    ds, report = ingest(csv_path, config)
    assert report.accepted == 20
    assert report.n_rejected == 0
    assert len(ds) == 20
    assert ds.records[0].id == "r00000"
    assert ds.records[0].features["sqft_living"] == records[0].features["sqft_living"]
    assert ds.currency == "USD"
    assert ds.provenance.rows_read == 20


def test_ingest_empty_file_with_header(tmp_path, config):
    csv_path = tmp_path / "empty.csv"
    csv_path.write_text(HEADER + "\n", encoding="utf-8")
    ds, report = ingest(csv_path, config)
    assert len(ds) == 0
    assert report.accepted == 0
    assert report.n_rejected == 0


def test_ingest_rejects_zero_price_row(tmp_path, config):
    rows = [
        HEADER,
        "a,2015-01-01,100000,47.5,-122.3,1000,2,1,7,good",
        "b,2015-01-02,0,47.5,-122.3,1000,2,1,7,good",
        "c,2015-01-03,150000,47.5,-122.3,1200,3,2,8,good",
        "d,2015-01-04,200000,47.5,-122.3,1400,3,2,8,fair",
        "e,2015-01-05,250000,47.5,-122.3,1600,4,2,9,good",
    ]
    csv_path = tmp_path / "data.csv"
    csv_path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    ds, report = ingest(csv_path, config)
    assert report.accepted == 4
    assert report.n_rejected == 1
    assert report.rejected[0].record_id == "b"
    assert report.rejected[0].row == 3
    assert "price" in report.rejected[0].reason


def test_ingest_rejects_bad_coordinates_and_duplicates(tmp_path, config):
    rows = [
        HEADER,
        "a,2015-01-01,100000,47.5,-122.3,1000,2,1,7,good",
        "b,2015-01-02,120000,95.0,-122.3,1000,2,1,7,good",
        "c,2015-01-03,130000,47.5,not-a-number,1000,2,1,7,good",
        "a,2015-01-04,140000,47.5,-122.3,1000,2,1,7,good",
    ]
    csv_path = tmp_path / "data.csv"
    csv_path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    ds, report = ingest(csv_path, config)
    assert report.accepted == 1
    reasons = [e.reason for e in report.rejected]
    assert any("latitude" in r for r in reasons)
    assert any("non-numeric" in r for r in reasons)
    assert any("duplicate" in r for r in reasons)


def test_ingest_missing_file_fails(tmp_path, config):
    with pytest.raises(DatasetError):
        ingest(tmp_path / "nope.csv", config)


def test_ingest_header_mismatch_fails(tmp_path, config):
    csv_path = tmp_path / "data.csv"
    csv_path.write_text("id,price\n", encoding="utf-8")
    with pytest.raises(SchemaError):
        ingest(csv_path, config)


def test_ingest_missing_numeric_feature_is_allowed(tmp_path, config):
    rows = [HEADER, "a,2015-01-01,100000,47.5,-122.3,,2,1,7,good"]
    csv_path = tmp_path / "data.csv"
    csv_path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    ds, report = ingest(csv_path, config)
    assert report.accepted == 1
    assert ds.records[0].features["sqft_living"] is None


def test_split_ten_records_random_is_repeatable():
    ds = synth_dataset(10)
    s1 = split(ds, seed=0, ordering="random")
    s2 = split(ds, seed=0, ordering="random")
    assert (len(s1.train), len(s1.validation), len(s1.test)) == (6, 2, 2)
    assert s1 == s2
    assert split(ds, seed=1, ordering="random") != s1


def test_split_chronological_test_holds_latest_dates():
    ds = synth_dataset(10)
    s = split(ds, ordering="chronological")
    test_dates = [ds.records[i].date for i in s.test]
    other_dates = [ds.records[i].date for i in s.train + s.validation]
    assert min(test_dates) >= max(other_dates)


def test_split_too_small_fails():
    ds = synth_dataset(4)
    with pytest.raises(DatasetError):
        split(ds)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(min_value=5, max_value=300), seed=st.integers(0, 2**31))
def test_split_partition_property(n, seed):
    ds = synth_dataset(n)
    s = split(ds, seed=seed)
    union = set(s.train) | set(s.validation) | set(s.test)
    assert union == set(range(n))
    assert len(s.train) + len(s.validation) + len(s.test) == n
    assert not (set(s.train) & set(s.validation))
    assert not (set(s.train) & set(s.test))
    assert not (set(s.validation) & set(s.test))
    # 60:20:20 within one record of exact
    assert abs(len(s.train) - 0.6 * n) <= 1
    assert abs(len(s.validation) - 0.2 * n) <= 1
    assert abs(len(s.test) - 0.2 * n) <= 1


def test_train_stats_basics():
    ds = synth_dataset(50, seed=2)
    s = split(ds, seed=0)
    stats = train_stats(ds, s)
    train_prices = [ds.records[i].price for i in s.train]
    assert stats.price_min == min(train_prices)
    assert stats.price_max == max(train_prices)
    assert stats.price_median == float(np.median(train_prices))
    assert stats.n_train == len(s.train)
    assert all(v >= 0 for v in stats.stds.values())
    assert train_stats(ds, s) == stats


def test_train_stats_single_record():
    ds = synth_dataset(10)
    s = DataSplit(train=(0,), validation=(1,), test=(2,), seed=0, ordering="random")
    stats = train_stats(ds, s)
    rec = ds.records[0]
    assert stats.means["sqft_living"] == rec.features["sqft_living"]
    assert stats.stds["sqft_living"] == 0.0
    assert stats.medians["sqft_living"] == rec.features["sqft_living"]
    assert stats.price_min == stats.price_max == stats.price_median == rec.price


def test_even_count_median_averages_central_values():
    # prices {100, 200, 300, 400} -> median 250
    values = np.array([100.0, 200.0, 300.0, 400.0])
    assert float(np.median(values)) == 250.0
    ds = synth_dataset(10)
    s = DataSplit(train=(0, 1, 2, 3), validation=(4,), test=(5,), seed=0, ordering="random")
    stats = train_stats(ds, s)
    train_prices = sorted(ds.records[i].price for i in s.train)
    assert stats.price_median == (train_prices[1] + train_prices[2]) / 2


def test_stats_ignore_validation_and_test_records():
    ds1 = synth_dataset(30, seed=5)
    s = split(ds1, seed=0)
    # rebuild with one test record's price changed; train stats must not move
    mutated = list(ds1.records)
    victim = s.test[0]
    rec = mutated[victim]
    mutated[victim] = type(rec)(
        id=rec.id,
        features=rec.features,
        categoricals=rec.categoricals,
        lat=rec.lat,
        lon=rec.lon,
        date=rec.date,
        price=rec.price * 10,
        currency=rec.currency,
        address=rec.address,
    )
    ds2 = Dataset(
        name=ds1.name,
        currency=ds1.currency,
        region=ds1.region,
        schema=ds1.schema,
        records=tuple(mutated),
        provenance=ds1.provenance,
    )
    assert train_stats(ds1, s) == train_stats(ds2, s)


def test_all_missing_feature_is_flagged():
    ds = synth_dataset(10)
    records = [
        type(r)(
            id=r.id,
            features={**r.features, "sqft_living": None},
            categoricals=r.categoricals,
            lat=r.lat,
            lon=r.lon,
            date=r.date,
            price=r.price,
            currency=r.currency,
            address=r.address,
        )
        for r in ds.records
    ]
    ds2 = Dataset(
        name=ds.name,
        currency=ds.currency,
        region=ds.region,
        schema=ds.schema,
        records=tuple(records),
        provenance=ds.provenance,
    )
    s = split(ds2, seed=0)
    stats = train_stats(ds2, s)
    assert "sqft_living" in stats.flagged
    assert stats.stds["sqft_living"] == 0.0


def test_sample_test_deterministic_subset():
    ds = synth_dataset(100)
    s = split(ds, seed=0)
    sampled = sample_test(s, 10, seed=0)
    assert sampled == sample_test(s, 10, seed=0)
    assert len(set(sampled)) == 10
    assert set(sampled) <= set(s.test)
    assert sample_test(s, 10, seed=1) != sampled


def test_sample_test_identity_and_full():
    ds = synth_dataset(20)
    s = split(ds, seed=0)
    assert sample_test(s, len(s.test), seed=0) == tuple(s.test)
    with pytest.raises(DatasetError):
        sample_test(s, len(s.test) + 1, seed=0)

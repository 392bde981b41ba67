import math

import numpy as np
import pytest

from survbeta.core import Dataset
from survbeta.data import (
    CsvSchema,
    SplitSpec,
    Standardizer,
    SyntheticConfig,
    event_time,
    generate_synthetic,
    load_csv,
    preset_config,
    save_csv,
    split,
    split_indices,
)
from survbeta.errors import (
    ConfigError,
    DegenerateSplitError,
    RowParseError,
    SchemaError,
)


# ---------------------------------------------------------------------------
# synthetic generation


def test_event_time_hook_with_fixed_driver():
    # (-log u)^(1/k) equals 1 at u = exp(-1)
    u = math.exp(-1.0)
    for x1, c, k in ((0.0, 3.0, 6.0), (1.2, 2.0, 4.0), (-0.7, 5.0, 1.0)):
        expected = (math.sin(c * x1) + c) / math.gamma(1.0 + 1.0 / k)
        assert event_time(x1, c, k, u) == pytest.approx(expected, abs=1e-12)


def test_censor_prob_zero_all_uncensored():
    cfg = preset_config("two-cluster", n_per_cluster=50, censor_prob=0.0, seed=1)
    ds = generate_synthetic(cfg)
    assert ds.events.all()


def test_generation_is_bit_reproducible():
    cfg = preset_config("two-cluster", n_per_cluster=40, seed=9)
    a = generate_synthetic(cfg)
    b = generate_synthetic(cfg)
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.times, b.times)
    assert np.array_equal(a.events, b.events)


def test_censoring_fraction_within_three_standard_errors():
    cfg = preset_config("two-cluster", n_per_cluster=5000, seed=3)
    ds = generate_synthetic(cfg)
    frac = 1.0 - ds.events.mean()
    se = math.sqrt(0.2 * 0.8 / ds.n)
    assert abs(frac - 0.2) <= 3 * se


def test_weibull_mean_identity_small_scale():
    # fixed x1 ~ 0 via a degenerate-width first dimension
    dim = 2
    lows = np.array([-1e-12, -2.0])
    highs = np.array([1e-12, 2.0])
    cfg = SyntheticConfig(
        dim=dim, clusters=((lows, highs),), n_per_cluster=20000,
        c=3.0, k_shape=6.0, censor_prob=0.0, seed=11,
    )
    ds = generate_synthetic(cfg)
    assert ds.times.mean() == pytest.approx(3.0, rel=0.02)


def test_cluster_geometry_of_presets():
    cfg = preset_config("two-cluster", n_per_cluster=200, seed=0)
    ds = generate_synthetic(cfg)
    first, second = ds.features[:200], ds.features[200:]
    assert first.min() >= -2.0 and first.max() <= 2.0
    assert second.min() >= 20.0 and second.max() <= 30.0

    shifted = preset_config("shifted-clusters", n_per_cluster=100, shift=5.0, seed=0)
    ds2 = generate_synthetic(shifted)
    second2 = ds2.features[100:]
    assert second2.min() >= 2.0 + 5.0 - 1e-9
    assert second2.max() <= 2.0 + 5.0 + 10.0 + 1e-9


def test_invalid_configs():
    lows, highs = np.zeros(2), np.ones(2)
    with pytest.raises(ConfigError):
        SyntheticConfig(dim=2, clusters=((lows, highs),), n_per_cluster=10, c=0.5)
    with pytest.raises(ConfigError):
        SyntheticConfig(dim=2, clusters=((highs, lows),), n_per_cluster=10)
    with pytest.raises(ConfigError):
        SyntheticConfig(dim=2, clusters=((lows, highs),), n_per_cluster=10, censor_prob=1.5)
    with pytest.raises(ConfigError):
        preset_config("no-such-preset")
    with pytest.raises(ConfigError):
        preset_config("shifted-clusters")  # shift missing


# ---------------------------------------------------------------------------
# standardization


def test_standardizer_statistics_and_zero_variance_guard():
    x = np.array([[1.0, 5.0], [3.0, 5.0], [5.0, 5.0]])
    sc = Standardizer.fit(x)
    z = sc.transform(x)
    assert np.allclose(z.mean(axis=0), 0.0, atol=1e-12)
    assert np.allclose(z[:, 0].std(), 1.0, atol=1e-12)
    assert np.all(z[:, 1] == 0.0)  # constant column maps to zero


def test_standardizer_train_statistics_apply_to_other_splits():
    rng = np.random.default_rng(0)
    train = rng.normal(2.0, 3.0, size=(50, 2))
    test = rng.normal(2.0, 3.0, size=(20, 2))
    sc = Standardizer.fit(train)
    expected = (test - train.mean(axis=0)) / train.std(axis=0)
    assert np.allclose(sc.transform(test), expected, atol=1e-12)


# ---------------------------------------------------------------------------
# splits


def test_split_everything_to_train():
    ds = generate_synthetic(preset_config("two-cluster", n_per_cluster=10, seed=0))
    train, val, test = split(ds, SplitSpec(1.0, 0.0, 0.0, seed=1))
    assert train.n == ds.n
    assert val is None and test is None


def test_split_exact_rounding():
    tr, va, te = split_indices(10, SplitSpec(0.6, 0.2, 0.2, seed=0))
    assert (tr.size, va.size, te.size) == (6, 2, 2)


def test_split_remainder_goes_to_train():
    tr, va, te = split_indices(7, SplitSpec(0.6, 0.2, 0.2, seed=0))
    assert (va.size, te.size) == (1, 1)
    assert tr.size == 5


def test_split_disjoint_cover_and_determinism():
    spec = SplitSpec(0.5, 0.3, 0.2, seed=17)
    a = split_indices(23, spec)
    b = split_indices(23, spec)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)
    merged = np.concatenate(a)
    assert np.array_equal(np.sort(merged), np.arange(23))


def test_split_degenerate_error():
    with pytest.raises(DegenerateSplitError):
        split_indices(2, SplitSpec(0.5, 0.25, 0.25, seed=0))


def test_split_spec_validation():
    with pytest.raises(ConfigError):
        SplitSpec(0.5, 0.5, 0.5)
    with pytest.raises(ConfigError):
        SplitSpec(-0.1, 0.6, 0.5)


# ---------------------------------------------------------------------------
# CSV ingestion


def _write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_load_csv_well_formed(tmp_path):
    path = _write(tmp_path, "time,event,a,b\n1.5,1,0.1,2.0\n2.5,0,0.2,3.0\n4.0,true,0.3,4.0\n")
    result = load_csv(path, CsvSchema("time", "event"))
    assert result.dataset.n == 3
    assert result.dropped_rows == 0
    assert result.feature_names == ("a", "b")
    assert np.array_equal(result.dataset.events, [True, False, True])


def test_load_csv_drops_rows_with_missing_cells(tmp_path):
    path = _write(tmp_path, "time,event,a\n1.0,1,0.5\n,1,0.6\n2.0,1,\n3.0,0,0.7\n")
    result = load_csv(path, CsvSchema("time", "event"))
    assert result.dataset.n == 2
    assert result.dropped_rows == 2


def test_load_csv_unparseable_time_raises_with_line(tmp_path):
    path = _write(tmp_path, "time,event,a\n1.0,1,0.5\nabc,1,0.6\n")
    with pytest.raises(RowParseError) as err:
        load_csv(path, CsvSchema("time", "event"))
    assert err.value.line == 3


def test_load_csv_missing_column_is_schema_error(tmp_path):
    path = _write(tmp_path, "time,a\n1.0,0.5\n")
    with pytest.raises(SchemaError):
        load_csv(path, CsvSchema("time", "event"))
    path2 = _write(tmp_path, "time,event,a\n1.0,1,0.5\n", name="d2.csv")
    with pytest.raises(SchemaError):
        load_csv(path2, CsvSchema("time", "event", feature_cols=("missing",)))


def test_load_csv_bad_event_value(tmp_path):
    path = _write(tmp_path, "time,event,a\n1.0,yes,0.5\n")
    with pytest.raises(RowParseError):
        load_csv(path, CsvSchema("time", "event"))


def test_load_csv_one_hot_first_appearance_order(tmp_path):
    path = _write(
        tmp_path,
        "time,event,grade\n1.0,1,b\n2.0,1,a\n3.0,0,b\n4.0,1,c\n",
    )
    result = load_csv(path, CsvSchema("time", "event", categorical=frozenset({"grade"})))
    assert result.feature_names == ("grade=b", "grade=a", "grade=c")
    assert np.array_equal(
        result.dataset.features,
        [[1, 0, 0], [0, 1, 0], [1, 0, 0], [0, 0, 1]],
    )
    spec = result.encoding[0]
    assert spec.categories == ("b", "a", "c")


def test_load_csv_fixed_category_order_rejects_unseen(tmp_path):
    path = _write(tmp_path, "time,event,grade\n1.0,1,z\n")
    schema = CsvSchema(
        "time", "event", categorical=frozenset({"grade"}),
        category_orders={"grade": ("a", "b")},
    )
    with pytest.raises(RowParseError):
        load_csv(path, schema)


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    ds = Dataset(rng.normal(size=(9, 3)), rng.uniform(0.1, 7.0, 9),
                 np.append(rng.random(8) < 0.5, True))
    path = tmp_path / "round.csv"
    save_csv(ds, path)
    result = load_csv(path, CsvSchema("time", "event"))
    assert np.array_equal(result.dataset.features, ds.features)
    assert np.array_equal(result.dataset.times, ds.times)
    assert np.array_equal(result.dataset.events, ds.events)

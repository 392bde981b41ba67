"""Data handling: synthetic two-cluster generation, CSV ingestion, splits
and feature standardization."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import Dataset
from .errors import (
    ConfigError,
    DegenerateDataError,
    DegenerateSplitError,
    InvalidInputError,
    RowParseError,
    SchemaError,
)

# ---------------------------------------------------------------------------
# standardization


@dataclass(frozen=True)
class Standardizer:
    """Per-feature mean/scale transform fitted on the training split only.

    Constant features get scale 1 so they map to zero instead of NaN.
    """

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, features) -> "Standardizer":
        x = np.asarray(features, dtype=float)
        if x.ndim != 2 or x.shape[0] == 0:
            raise InvalidInputError("features must be a nonempty (n, d) array")
        mean = x.mean(axis=0)
        scale = x.std(axis=0)
        scale = np.where(scale > 0.0, scale, 1.0)
        mean.setflags(write=False)
        scale.setflags(write=False)
        return cls(mean, scale)

    def transform(self, features) -> np.ndarray:
        x = np.asarray(features, dtype=float)
        if x.shape[-1] != self.mean.shape[0]:
            raise InvalidInputError(
                f"expected {self.mean.shape[0]} features, got {x.shape[-1]}"
            )
        return (x - self.mean) / self.scale

    def transform_one(self, x) -> np.ndarray:
        return self.transform(np.asarray(x, dtype=float)[None, :])[0]


# ---------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class SyntheticConfig:
    """Two-cluster (or k-cluster) uniform covariates with Weibull times.

    Each cluster is a hyper-rectangle given by per-dimension (low, high)
    bounds.  Event times follow a Weibull law whose mean tracks
    ``sin(c * x_1) + c``; censoring is an independent Bernoulli draw.
    ``shift`` repositions the second cluster at offset ``shift`` past the
    first one (width 10 per dimension).
    """

    dim: int
    clusters: tuple
    n_per_cluster: int
    c: float = 3.0
    k_shape: float = 6.0
    censor_prob: float = 0.2
    shift: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigError("dim must be >= 1")
        if self.n_per_cluster < 1:
            raise ConfigError("n_per_cluster must be >= 1")
        if not (0.0 <= self.censor_prob <= 1.0):
            raise ConfigError("censor_prob must lie in [0, 1]")
        if not (self.k_shape > 0.0):
            raise ConfigError("k_shape must be positive")
        if self.c < 1.0:
            raise ConfigError(
                "c must be >= 1 so the location term sin(c*x1) + c stays positive"
            )
        if len(self.clusters) == 0:
            raise ConfigError("at least one cluster is required")
        if self.shift is not None and len(self.clusters) < 2:
            raise ConfigError("shift requires a second cluster")
        cleaned = []
        for lows, highs in self.clusters:
            lo = np.asarray(lows, dtype=float)
            hi = np.asarray(highs, dtype=float)
            if lo.shape != (self.dim,) or hi.shape != (self.dim,):
                raise ConfigError("cluster bounds must match the dimension")
            if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
                raise ConfigError("cluster bounds must be finite")
            if np.any(lo >= hi):
                raise ConfigError("cluster bounds must satisfy low < high per dimension")
            lo.setflags(write=False)
            hi.setflags(write=False)
            cleaned.append((lo, hi))
        object.__setattr__(self, "clusters", tuple(cleaned))

    def effective_clusters(self) -> tuple:
        """Cluster bounds with the optional second-cluster shift applied."""
        if self.shift is None:
            return self.clusters
        out = list(self.clusters)
        _, hi1 = out[0]
        lo2 = hi1 + self.shift
        out[1] = (lo2, lo2 + 10.0)
        return tuple(out)


def event_time(x1, c: float, k_shape: float, u):
    """Weibull event time(s) with mean ``sin(c * x1) + c`` at covariate ``x1``.

    ``u`` is the uniform-(0, 1] driver; fixing it makes the draw
    deterministic, which is the test hook for the formula itself.
    """
    scale = (np.sin(c * np.asarray(x1, dtype=float)) + c) / math.gamma(1.0 + 1.0 / k_shape)
    return scale * (-np.log(u)) ** (1.0 / k_shape)


def generate_synthetic(cfg: SyntheticConfig) -> Dataset:
    """Draw a synthetic dataset; bit-reproducible for a fixed config."""
    rng = np.random.default_rng(cfg.seed)
    blocks = [
        rng.uniform(lo, hi, size=(cfg.n_per_cluster, cfg.dim))
        for lo, hi in cfg.effective_clusters()
    ]
    features = np.vstack(blocks)
    n = features.shape[0]
    events = rng.random(n) < 1.0 - cfg.censor_prob
    u = 1.0 - rng.random(n)  # in (0, 1]: keeps -log(u) finite
    times = event_time(features[:, 0], cfg.c, cfg.k_shape, u)
    return Dataset(features, times, events)


def preset_config(name: str, **overrides) -> SyntheticConfig:
    """Named synthetic presets addressable from the CLI.

    ``two-cluster``       five uniform dimensions, clusters at [-2, 2] and
                          [20, 30], 500 points each, c = 3, k = 6.
    ``shifted-clusters``  same, but the second cluster sits at offset
                          ``shift`` past the first (pass ``shift=...``).
    """
    known = {"two-cluster", "shifted-clusters"}
    if name not in known:
        raise ConfigError(f"unknown preset {name!r}; expected one of {sorted(known)}")
    params = {
        "dim": 5,
        "n_per_cluster": 500,
        "c": 3.0,
        "k_shape": 6.0,
        "censor_prob": 0.2,
        "seed": 0,
    }
    shift = overrides.pop("shift", None)
    params.update(overrides)
    dim = int(params["dim"])
    lo1 = np.full(dim, -2.0)
    cluster1 = (lo1, lo1 + 4.0)
    lo2 = np.full(dim, 20.0)
    cluster2 = (lo2, lo2 + 10.0)
    if name == "shifted-clusters":
        if shift is None:
            raise ConfigError("preset 'shifted-clusters' needs a shift value")
        return SyntheticConfig(
            clusters=(cluster1, cluster2), shift=float(shift), **params
        )
    return SyntheticConfig(clusters=(cluster1, cluster2), **params)


# ---------------------------------------------------------------------------
# CSV ingestion


_TRUE_VALUES = {"1", "true"}
_FALSE_VALUES = {"0", "false"}
_MISSING_VALUES = {"", "na", "nan"}


@dataclass(frozen=True)
class FeatureSpec:
    """How one source column is encoded: numeric, or one-hot categories."""

    name: str
    categories: tuple[str, ...] | None = None  # None means numeric


@dataclass(frozen=True)
class CsvSchema:
    """Declares which columns carry time, event and features.

    ``feature_cols=None`` uses every remaining column.  Columns listed in
    ``categorical`` are one-hot encoded with categories ordered by first
    appearance, unless a fixed order is pinned via ``category_orders``
    (used when re-encoding prediction inputs against a trained model).
    """

    time_col: str
    event_col: str
    feature_cols: tuple[str, ...] | None = None
    categorical: frozenset[str] = frozenset()
    category_orders: dict | None = None


class CsvLoadResult(NamedTuple):
    dataset: Dataset
    dropped_rows: int
    feature_names: tuple[str, ...]
    encoding: tuple[FeatureSpec, ...]


def _parse_event(raw: str, line: int) -> bool:
    low = raw.lower()
    if low in _TRUE_VALUES:
        return True
    if low in _FALSE_VALUES:
        return False
    raise RowParseError(f"line {line}: cannot parse event value {raw!r}", line)


def load_csv(path, schema: CsvSchema) -> CsvLoadResult:
    """Load survival records from a headered CSV file.

    Rows with a missing time, event or feature cell are dropped and
    counted; a non-missing cell that fails to parse raises
    :class:`RowParseError` with its line number.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, a header row is required") from None
        header = [h.strip() for h in header]
        positions = {name: i for i, name in enumerate(header)}
        for required in (schema.time_col, schema.event_col):
            if required not in positions:
                raise SchemaError(f"{path}: missing required column {required!r}")
        if schema.feature_cols is None:
            feature_cols = tuple(
                h for h in header if h not in (schema.time_col, schema.event_col)
            )
        else:
            feature_cols = tuple(schema.feature_cols)
            for col in feature_cols:
                if col not in positions:
                    raise SchemaError(f"{path}: missing feature column {col!r}")
        if not feature_cols:
            raise SchemaError(f"{path}: no feature columns")

        t_pos = positions[schema.time_col]
        e_pos = positions[schema.event_col]
        f_pos = [positions[c] for c in feature_cols]
        watched = [t_pos, e_pos] + f_pos

        times: list[float] = []
        events: list[bool] = []
        raw_rows: list[list[str]] = []
        dropped = 0
        for line, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise RowParseError(
                    f"line {line}: expected {len(header)} cells, got {len(row)}", line
                )
            cells = [c.strip() for c in row]
            if any(cells[p].lower() in _MISSING_VALUES for p in watched):
                dropped += 1
                continue
            try:
                times.append(float(cells[t_pos]))
            except ValueError:
                raise RowParseError(
                    f"line {line}: cannot parse time value {cells[t_pos]!r}", line
                ) from None
            events.append(_parse_event(cells[e_pos], line))
            raw_rows.append([cells[p] for p in f_pos])

    if not raw_rows:
        raise DegenerateDataError(f"{path}: no usable rows after dropping {dropped}")

    columns: list[np.ndarray] = []
    names: list[str] = []
    encoding: list[FeatureSpec] = []
    for col_idx, col_name in enumerate(feature_cols):
        raw = [r[col_idx] for r in raw_rows]
        if col_name in schema.categorical:
            fixed = (schema.category_orders or {}).get(col_name)
            if fixed is None:
                categories: list[str] = []
                for value in raw:
                    if value not in categories:
                        categories.append(value)
            else:
                categories = list(fixed)
                unseen = sorted(set(raw) - set(categories))
                if unseen:
                    raise RowParseError(
                        f"column {col_name!r}: categories {unseen} not seen at fit time"
                    )
            for cat in categories:
                columns.append(np.array([1.0 if v == cat else 0.0 for v in raw]))
                names.append(f"{col_name}={cat}")
            encoding.append(FeatureSpec(col_name, tuple(categories)))
        else:
            try:
                columns.append(np.array([float(v) for v in raw]))
            except ValueError:
                bad = next(v for v in raw if not _is_float(v))
                raise RowParseError(
                    f"column {col_name!r}: cannot parse feature value {bad!r}"
                ) from None
            names.append(col_name)
            encoding.append(FeatureSpec(col_name, None))

    features = np.column_stack(columns)
    ds = Dataset(features, np.array(times), np.array(events))
    return CsvLoadResult(ds, dropped, tuple(names), tuple(encoding))


def _is_float(value: str) -> bool:
    try:
        float(value)
        return True
    except ValueError:
        return False


def save_csv(ds: Dataset, path, feature_names=None) -> None:
    """Write a dataset to CSV with exact float round-trip via repr."""
    if feature_names is None:
        feature_names = [f"x{i}" for i in range(ds.dim)]
    if len(feature_names) != ds.dim:
        raise InvalidInputError("need one feature name per column")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "event", *feature_names])
        for i in range(ds.n):
            writer.writerow(
                [repr(float(ds.times[i])), int(ds.events[i])]
                + [repr(float(v)) for v in ds.features[i]]
            )


# ---------------------------------------------------------------------------
# splits


@dataclass(frozen=True)
class SplitSpec:
    """Train/validation/test fractions (must sum to 1) plus a seed."""

    train_frac: float
    val_frac: float
    test_frac: float
    seed: int = 0

    def __post_init__(self):
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if any(f < 0.0 for f in fracs):
            raise ConfigError("split fractions must be nonnegative")
        if abs(sum(fracs) - 1.0) > 1e-12:
            raise ConfigError(f"split fractions must sum to 1, got {sum(fracs)}")


def split_indices(n: int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Disjoint (train, val, test) index arrays covering ``range(n)``.

    Part sizes are the rounded fractions with the remainder assigned to
    train; deterministic for a fixed seed.
    """
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    n_val = int(math.floor(spec.val_frac * n + 0.5))
    n_test = int(math.floor(spec.test_frac * n + 0.5))
    n_train = n - n_val - n_test
    for size, frac, name in (
        (n_train, spec.train_frac, "train"),
        (n_val, spec.val_frac, "val"),
        (n_test, spec.test_frac, "test"),
    ):
        if frac > 0.0 and size <= 0:
            raise DegenerateSplitError(
                f"{name} part is empty for n={n} with fraction {frac}"
            )
    rng = np.random.default_rng(spec.seed)
    perm = rng.permutation(n)
    train = np.sort(perm[:n_train])
    val = np.sort(perm[n_train : n_train + n_val])
    test = np.sort(perm[n_train + n_val :])
    return train, val, test


def split(ds: Dataset, spec: SplitSpec):
    """Split a dataset into (train, val, test); empty parts come back as None."""
    train_idx, val_idx, test_idx = split_indices(ds.n, spec)
    parts = []
    for idx in (train_idx, val_idx, test_idx):
        parts.append(ds.take(idx) if idx.size else None)
    return tuple(parts)

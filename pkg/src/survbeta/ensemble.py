"""Attention-weighted ensembles of Beran estimators.

Subsamples are overlapping neighborhoods of randomly chosen centers; each
carries its own kernel and prototype bandwidth.  Predictions of the weak
learners are mixed with attention weights built from the distance between
the query and each subsample's prototype, contaminated by a trainable
simplex vector.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .beran import BeranModel
from .core import (
    KERNEL_FAMILIES,
    Dataset,
    Kernel,
    StepSurvivalFunction,
    normalized_weight_rows,
    squared_distances,
)
from .data import FeatureSpec, Standardizer
from .errors import InvalidInputError

MODEL_FORMAT = "survbeta-model"
MODEL_VERSION = 1

PROTOTYPE_MODES = ("nadaraya-watson", "mean")


@dataclass
class Subsample:
    """Index set of one weak learner plus its kernel and prototype bandwidth."""

    indices: np.ndarray
    kernel: Kernel
    eta: float
    beran: BeranModel | None = None

    def __post_init__(self):
        idx = np.array(self.indices, dtype=int)
        if idx.ndim != 1 or idx.size == 0:
            raise InvalidInputError("subsample indices must be a nonempty 1-d array")
        if len(np.unique(idx)) != idx.size:
            raise InvalidInputError("subsample indices must be unique")
        if not (self.eta > 0.0):
            raise InvalidInputError("eta must be positive")
        idx.setflags(write=False)
        self.indices = idx
        self.eta = float(self.eta)


@dataclass
class EnsembleModel:
    """M fitted subsamples plus the global attention parameters.

    ``w`` is the shared softmax temperature of the aggregation weights,
    ``epsilon`` the contamination level and ``v`` the trained simplex
    vector mixed in by the contamination.
    """

    subsamples: list[Subsample]
    w: float
    epsilon: float
    v: np.ndarray
    prototype_mode: str = "nadaraya-watson"

    def __post_init__(self):
        if len(self.subsamples) == 0:
            raise InvalidInputError("an ensemble needs at least one subsample")
        if not (self.w > 0.0):
            raise InvalidInputError("w must be positive")
        if not (0.0 <= self.epsilon <= 1.0):
            raise InvalidInputError("epsilon must lie in [0, 1]")
        v = np.array(self.v, dtype=float)
        if v.shape != (len(self.subsamples),):
            raise InvalidInputError("v must have one entry per subsample")
        if v.min() < -1e-10 or abs(v.sum() - 1.0) > 1e-10:
            raise InvalidInputError("v must lie on the probability simplex")
        v = np.clip(v, 0.0, None)
        v = v / v.sum()
        v.setflags(write=False)
        self.v = v
        self.w = float(self.w)
        self.epsilon = float(self.epsilon)
        if self.prototype_mode not in PROTOTYPE_MODES:
            raise InvalidInputError(
                f"prototype_mode must be one of {PROTOTYPE_MODES}"
            )

    @property
    def m(self) -> int:
        return len(self.subsamples)


def generate_subsamples(
    ds: Dataset,
    m_count: int,
    k_neighbors: int,
    seed: int,
    *,
    tau_choices=(1.0,),
    eta: float = 1.0,
) -> list[Subsample]:
    """Draw M overlapping neighborhoods as weak-learner index sets.

    Centers are drawn uniformly without replacement (with replacement once
    M exceeds n); each subsample holds the K records nearest to its center
    in Euclidean distance, the center included, ties broken by lower
    index.  Every subsample gets a kernel family drawn uniformly from the
    four families and a bandwidth drawn uniformly from ``tau_choices``.
    """
    n = ds.n
    if m_count < 1:
        raise InvalidInputError("m_count must be >= 1")
    if not (1 <= k_neighbors <= n):
        raise InvalidInputError(f"k_neighbors must lie in [1, {n}], got {k_neighbors}")
    tau_choices = tuple(float(t) for t in tau_choices)
    if not tau_choices:
        raise InvalidInputError("tau_choices must be nonempty")
    rng = np.random.default_rng(seed)
    centers = rng.choice(n, size=m_count, replace=m_count > n)
    out = []
    for center in centers:
        d2 = squared_distances(ds.features[center], ds.features)[0]
        order = np.lexsort((np.arange(n), d2))
        chosen = np.sort(order[:k_neighbors])
        family = KERNEL_FAMILIES[rng.integers(len(KERNEL_FAMILIES))]
        tau = tau_choices[rng.integers(len(tau_choices))]
        out.append(Subsample(chosen, Kernel(family, tau), eta))
    return out


def fit_weak_learners(ds: Dataset, subsamples: list[Subsample]) -> None:
    """Fit the Beran estimator of every subsample in place."""
    for s in subsamples:
        s.beran = BeranModel(
            ds.features[s.indices], ds.times[s.indices], ds.events[s.indices], s.kernel
        )


def prototype(s: Subsample, ds: Dataset, x) -> np.ndarray:
    """Query-dependent prototype: kernel-weighted mean of the subsample.

    Uses the subsample's kernel family at bandwidth ``eta``; the result is
    a convex combination of the subsample's feature vectors.
    """
    return prototype_rows(s, ds, np.asarray(x, dtype=float)[None, :])[0]


def prototype_rows(s: Subsample, ds: Dataset, queries) -> np.ndarray:
    feats = ds.features[s.indices]
    d2 = squared_distances(queries, feats)
    mu = normalized_weight_rows(Kernel(s.kernel.family, s.eta), d2)
    return mu @ feats


def mean_prototype(s: Subsample, ds: Dataset) -> np.ndarray:
    """Query-independent prototype: the plain mean of the subsample."""
    return ds.features[s.indices].mean(axis=0)


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    w = np.exp(shifted)
    return w / w.sum(axis=1, keepdims=True)


def proto_sqdist_rows(model: EnsembleModel, ds: Dataset, queries) -> np.ndarray:
    """Squared distance from each query to each subsample's prototype, (Q, M)."""
    x = np.asarray(queries, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    cols = []
    for s in model.subsamples:
        if model.prototype_mode == "mean":
            e = mean_prototype(s, ds)
            diff = x - e
            cols.append(np.einsum("qd,qd->q", diff, diff))
        else:
            e = prototype_rows(s, ds, x)
            diff = x - e
            cols.append(np.einsum("qd,qd->q", diff, diff))
    return np.column_stack(cols)


def attention_rows(model: EnsembleModel, ds: Dataset, queries) -> np.ndarray:
    """Aggregation weights for each query row, shape (Q, M).

    The softmax part always uses the Gaussian form at temperature ``w``,
    independent of the per-subsample kernel families.
    """
    d2 = proto_sqdist_rows(model, ds, queries)
    p = _softmax_rows(-d2 / model.w)
    return (1.0 - model.epsilon) * p + model.epsilon * model.v[None, :]


def attention_weights(model: EnsembleModel, ds: Dataset, x) -> np.ndarray:
    """Aggregation weights at one query point, a probability vector of length M."""
    return attention_rows(model, ds, np.asarray(x, dtype=float)[None, :])[0]


def _require_fitted(model: EnsembleModel) -> list[BeranModel]:
    weak = []
    for s in model.subsamples:
        if s.beran is None:
            raise InvalidInputError("subsamples must be fitted (call fit_weak_learners)")
        weak.append(s.beran)
    return weak


def union_grid(weak_models: list[BeranModel]) -> np.ndarray:
    return np.unique(np.concatenate([m.grid_times for m in weak_models]))


def _values_on_grid(weak: BeranModel, queries, grid: np.ndarray) -> np.ndarray:
    """Right-continuous re-gridding of weak survival values, shape (Q, len(grid))."""
    vals = weak.sf_values(queries)
    full = np.concatenate([np.ones((vals.shape[0], 1)), vals], axis=1)
    idx = np.searchsorted(weak.grid_times, grid, side="right")
    return full[:, idx]


def _mix_sfs(weak_models: list[BeranModel], gamma: np.ndarray, x) -> StepSurvivalFunction:
    grid = union_grid(weak_models)
    stacked = np.stack([_values_on_grid(m, x, grid)[0] for m in weak_models])
    mixed = np.clip(gamma @ stacked, 0.0, 1.0)
    # a convex mix of non-increasing curves is non-increasing; the running
    # minimum only grinds off last-ulp dust from the dot products
    mixed = np.minimum.accumulate(mixed)
    return StepSurvivalFunction(grid, mixed)


def predict_sf(model: EnsembleModel, ds: Dataset, x) -> StepSurvivalFunction:
    """Ensemble survival curve: attention-weighted mix of the weak curves.

    Weak curves are evaluated on the union of all subsample time grids,
    which makes the convex mix of step functions exact.
    """
    weak = _require_fitted(model)
    gamma = attention_weights(model, ds, x)
    return _mix_sfs(weak, gamma, np.asarray(x, dtype=float)[None, :])


def _expected_time_rows(grid_times: np.ndarray, vals: np.ndarray, horizon: float) -> np.ndarray:
    """Integral of step curves from 0 to ``horizon`` (flat past their grid)."""
    widths = np.diff(np.concatenate(([0.0], grid_times)))
    lead = np.concatenate([np.ones((vals.shape[0], 1)), vals[:, :-1]], axis=1)
    base = lead @ widths
    return base + vals[:, -1] * (horizon - grid_times[-1])


def weak_expected_time_rows(model: EnsembleModel, queries, horizon: float | None = None) -> np.ndarray:
    """Expected time per query and weak learner, shape (Q, M).

    With ``horizon=None`` each learner integrates over its own grid only;
    otherwise all integrals extend flat to the shared horizon, which is
    what makes the ensemble expected time equal the expected time of the
    mixed curve.
    """
    weak = _require_fitted(model)
    cols = []
    for m in weak:
        vals = m.sf_values(queries)
        h = m.grid_times[-1] if horizon is None else horizon
        cols.append(_expected_time_rows(m.grid_times, vals, h))
    return np.column_stack(cols)


def predict_expected_time_rows(model: EnsembleModel, ds: Dataset, queries) -> np.ndarray:
    weak = _require_fitted(model)
    horizon = max(m.grid_times[-1] for m in weak)
    gamma = attention_rows(model, ds, queries)
    et = weak_expected_time_rows(model, queries, horizon)
    return np.sum(gamma * et, axis=1)


def predict_expected_time(model: EnsembleModel, ds: Dataset, x) -> float:
    """Attention-weighted mean of the weak learners' expected times."""
    return float(predict_expected_time_rows(model, ds, np.asarray(x, float)[None, :])[0])


def bagging_predict_sf(weak_models: list[BeranModel], ds: Dataset, x) -> StepSurvivalFunction:
    """Plain-bagging baseline: uniform mix of the weak survival curves."""
    if len(weak_models) == 0:
        raise InvalidInputError("weak_models must be nonempty")
    gamma = np.full(len(weak_models), 1.0 / len(weak_models))
    return _mix_sfs(weak_models, gamma, np.asarray(x, dtype=float)[None, :])


# ---------------------------------------------------------------------------
# fitted model wrapper and serialization


@dataclass
class SurvBetaModel:
    """A fitted ensemble bundled with its training context.

    Carries the standardized training data and the standardizer, so the
    model is self-contained for prediction and serialization.
    """

    ensemble: EnsembleModel
    train_data: Dataset
    scaler: Standardizer
    variant: str = "survbeta-opt"
    report: dict = field(default_factory=dict)
    feature_encoding: tuple = ()

    def predict_sf(self, x_raw) -> StepSurvivalFunction:
        z = self.scaler.transform_one(x_raw)
        return predict_sf(self.ensemble, self.train_data, z)

    def predict_expected_time(self, x_raw) -> float:
        z = self.scaler.transform_one(x_raw)
        return predict_expected_time(self.ensemble, self.train_data, z)

    def predict_expected_time_batch(self, features_raw) -> np.ndarray:
        z = self.scaler.transform(features_raw)
        return predict_expected_time_rows(self.ensemble, self.train_data, z)


def save_model(model: SurvBetaModel, path) -> None:
    """Serialize a fitted model to a self-describing JSON document.

    Floats go through ``repr`` (Python's JSON encoder), so loading on the
    same platform reproduces predictions bit for bit.
    """
    ens = model.ensemble
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "variant": model.variant,
        "scaler": {
            "mean": model.scaler.mean.tolist(),
            "scale": model.scaler.scale.tolist(),
        },
        "train": {
            "features": model.train_data.features.tolist(),
            "times": model.train_data.times.tolist(),
            "events": model.train_data.events.tolist(),
        },
        "ensemble": {
            "w": ens.w,
            "epsilon": ens.epsilon,
            "v": ens.v.tolist(),
            "prototype_mode": ens.prototype_mode,
            "subsamples": [
                {
                    "indices": s.indices.tolist(),
                    "kernel_family": s.kernel.family.value,
                    "tau": s.kernel.bandwidth,
                    "eta": s.eta,
                }
                for s in ens.subsamples
            ],
        },
        "feature_encoding": [
            {"name": spec.name, "categories": list(spec.categories) if spec.categories else None}
            for spec in model.feature_encoding
        ],
        "report": model.report,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_model(path) -> SurvBetaModel:
    """Load a model document written by :func:`save_model`."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_FORMAT:
        raise InvalidInputError(f"{path}: not a model document")
    if doc.get("version") != MODEL_VERSION:
        raise InvalidInputError(f"{path}: unsupported model version {doc.get('version')}")
    scaler = Standardizer(
        mean=np.array(doc["scaler"]["mean"], dtype=float),
        scale=np.array(doc["scaler"]["scale"], dtype=float),
    )
    train = Dataset(
        doc["train"]["features"],
        doc["train"]["times"],
        doc["train"]["events"],
        require_event=False,
    )
    subsamples = []
    for item in doc["ensemble"]["subsamples"]:
        subsamples.append(
            Subsample(
                np.array(item["indices"], dtype=int),
                Kernel(item["kernel_family"], item["tau"]),
                item["eta"],
            )
        )
    fit_weak_learners(train, subsamples)
    ens = EnsembleModel(
        subsamples=subsamples,
        w=doc["ensemble"]["w"],
        epsilon=doc["ensemble"]["epsilon"],
        v=np.array(doc["ensemble"]["v"], dtype=float),
        prototype_mode=doc["ensemble"]["prototype_mode"],
    )
    encoding = tuple(
        FeatureSpec(item["name"], tuple(item["categories"]) if item["categories"] else None)
        for item in doc.get("feature_encoding", [])
    )
    return SurvBetaModel(
        ensemble=ens,
        train_data=train,
        scaler=scaler,
        variant=doc.get("variant", "survbeta-opt"),
        report=doc.get("report", {}),
        feature_encoding=encoding,
    )

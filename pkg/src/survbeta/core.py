"""Core survival-analysis primitives.

Domain types (records, datasets, step survival functions, kernels,
comparable pairs) together with the ranking metric, the likelihood-style
loss terms and the pair-reduction strategies used by the estimators and
the training code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

import numpy as np
from scipy.special import stdtr

from .errors import DegenerateDataError, InvalidInputError

#: Probability clamp applied inside logarithms so that survival values of
#: exactly 0 or 1 cannot produce infinite loss terms.
LOG_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# kernels


class KernelFamily(str, Enum):
    GAUSSIAN = "gaussian"
    EPANECHNIKOV = "epanechnikov"
    TRIANGULAR = "triangular"
    QUARTIC = "quartic"


KERNEL_FAMILIES: tuple[KernelFamily, ...] = tuple(KernelFamily)


@dataclass(frozen=True)
class Kernel:
    """A kernel family together with its bandwidth.

    The kernel argument is the squared Euclidean distance scaled by the
    bandwidth, ``u = dist_sq / bandwidth``.  Compact families are clamped at
    zero outside their support, so every kernel value is nonnegative and
    maximal at zero distance.
    """

    family: KernelFamily
    bandwidth: float

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))
        b = float(self.bandwidth)
        if not (math.isfinite(b) and b > 0.0):
            raise InvalidInputError(
                f"kernel bandwidth must be positive and finite, got {self.bandwidth!r}"
            )
        object.__setattr__(self, "bandwidth", b)


def _check_dist_sq(dist_sq) -> np.ndarray:
    d = np.asarray(dist_sq, dtype=float)
    if not np.all(np.isfinite(d)):
        raise InvalidInputError("squared distances must be finite")
    if np.any(d < 0.0):
        raise InvalidInputError("squared distances must be nonnegative")
    return d


def raw_kernel_values(kernel: Kernel, dist_sq) -> np.ndarray:
    """Unnormalized kernel values for an array of squared distances."""
    d = _check_dist_sq(dist_sq)
    u = d / kernel.bandwidth
    if kernel.family is KernelFamily.GAUSSIAN:
        return np.exp(-u)
    if kernel.family is KernelFamily.EPANECHNIKOV:
        return 0.75 * np.maximum(0.0, 1.0 - u * u)
    if kernel.family is KernelFamily.TRIANGULAR:
        return np.maximum(0.0, 1.0 - u)
    # quartic: the support clamp sits inside the square so the value decays
    # to zero and stays there instead of growing again
    return 0.9375 * np.maximum(0.0, 1.0 - u * u) ** 2


def kernel_value(kernel: Kernel, dist_sq: float) -> float:
    """Kernel value at a single squared distance."""
    return float(raw_kernel_values(kernel, dist_sq))


def normalized_weights_from_dist_sq(kernel: Kernel, dist_sq) -> np.ndarray:
    """Kernel weights normalized to a probability vector.

    Gaussian weights are computed as a numerically stable softmax of the
    scaled negative distances (identical to normalizing the raw values in
    exact arithmetic).  For compact kernels an all-zero row falls back to
    the uniform vector, which makes a far-away query predict the
    unconditional product-limit curve downstream.
    """
    d = _check_dist_sq(dist_sq)
    if d.ndim != 1 or d.size == 0:
        raise InvalidInputError("dist_sq must be a nonempty 1-d array")
    if kernel.family is KernelFamily.GAUSSIAN:
        z = -(d - d.min()) / kernel.bandwidth
        w = np.exp(z)
    else:
        w = raw_kernel_values(kernel, d)
        total = w.sum()
        if total <= 0.0:
            return np.full(d.shape, 1.0 / d.size)
    return w / w.sum()


def normalized_weight_rows(kernel: Kernel, dist_sq_rows) -> np.ndarray:
    """Row-wise :func:`normalized_weights_from_dist_sq` for a (Q, K) array."""
    d = _check_dist_sq(dist_sq_rows)
    if d.ndim != 2 or d.shape[1] == 0:
        raise InvalidInputError("dist_sq_rows must be a (Q, K) array with K >= 1")
    if kernel.family is KernelFamily.GAUSSIAN:
        z = -(d - d.min(axis=1, keepdims=True)) / kernel.bandwidth
        w = np.exp(z)
        return w / w.sum(axis=1, keepdims=True)
    w = raw_kernel_values(kernel, d)
    totals = w.sum(axis=1, keepdims=True)
    uniform = 1.0 / d.shape[1]
    safe = np.where(totals > 0.0, totals, 1.0)
    return np.where(totals > 0.0, w / safe, uniform)


def normalized_weights(kernel: Kernel, query, keys) -> np.ndarray:
    """Attention weights of ``query`` over ``keys`` under ``kernel``.

    Parameters
    ----------
    query : array of shape (d,)
    keys : array of shape (K, d), K >= 1

    Returns
    -------
    ndarray of shape (K,) with nonnegative entries summing to one.
    """
    keys = np.asarray(keys, dtype=float)
    if keys.ndim != 2 or keys.shape[0] == 0:
        raise InvalidInputError("keys must be a nonempty (K, d) array")
    q = np.asarray(query, dtype=float)
    if q.shape != (keys.shape[1],):
        raise InvalidInputError(
            f"query has shape {q.shape}, expected ({keys.shape[1]},)"
        )
    if not np.all(np.isfinite(q)) or not np.all(np.isfinite(keys)):
        raise InvalidInputError("query and keys must be finite")
    d2 = np.sum((keys - q) ** 2, axis=1)
    return normalized_weights_from_dist_sq(kernel, d2)


def squared_distances(queries, keys) -> np.ndarray:
    """Exact pairwise squared Euclidean distances, shape (Q, K).

    Computed from explicit differences (not the expanded dot-product form)
    so that coincident points give exactly zero.
    """
    q = np.asarray(queries, dtype=float)
    k = np.asarray(keys, dtype=float)
    if q.ndim == 1:
        q = q[None, :]
    diff = q[:, None, :] - k[None, :, :]
    return np.einsum("qkd,qkd->qk", diff, diff)


# ---------------------------------------------------------------------------
# records and datasets


@dataclass(frozen=True)
class SurvivalRecord:
    """One observation: feature vector, recorded time, censoring indicator.

    ``event`` is True for an observed (uncensored) event and False when the
    recorded time is only a lower bound.
    """

    features: np.ndarray
    time: float
    event: bool

    def __post_init__(self):
        f = np.array(self.features, dtype=float)
        if f.ndim != 1 or f.size == 0:
            raise InvalidInputError("features must be a nonempty 1-d vector")
        if not np.all(np.isfinite(f)):
            raise InvalidInputError("features must be finite")
        t = float(self.time)
        if not (math.isfinite(t) and t >= 0.0):
            raise InvalidInputError(f"time must be finite and >= 0, got {self.time!r}")
        f.setflags(write=False)
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "time", t)
        object.__setattr__(self, "event", bool(self.event))


class Dataset:
    """Ordered collection of survival records stored as dense arrays.

    Arrays are made read-only at construction, so datasets can be shared
    freely between threads.
    """

    __slots__ = ("features", "times", "events")

    def __init__(self, features, times, events, *, require_event: bool = True):
        f = np.array(features, dtype=float)
        t = np.array(times, dtype=float)
        e = np.array(events, dtype=bool)
        if f.ndim != 2 or f.shape[0] == 0 or f.shape[1] == 0:
            raise InvalidInputError("features must be a nonempty (n, d) array")
        n = f.shape[0]
        if t.shape != (n,) or e.shape != (n,):
            raise InvalidInputError("times and events must have one entry per record")
        if not np.all(np.isfinite(f)):
            raise InvalidInputError("features must be finite")
        if not np.all(np.isfinite(t)) or np.any(t < 0.0):
            raise InvalidInputError("times must be finite and >= 0")
        if require_event and not e.any():
            raise DegenerateDataError(
                "dataset holds no uncensored record; comparable pairs cannot be built"
            )
        for a in (f, t, e):
            a.setflags(write=False)
        self.features = f
        self.times = t
        self.events = e

    @classmethod
    def from_records(cls, records: Sequence[SurvivalRecord], *, require_event: bool = True) -> "Dataset":
        if len(records) == 0:
            raise InvalidInputError("records must be nonempty")
        feats = np.stack([r.features for r in records])
        times = np.array([r.time for r in records])
        events = np.array([r.event for r in records])
        return cls(feats, times, events, require_event=require_event)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.n

    def record(self, i: int) -> SurvivalRecord:
        return SurvivalRecord(self.features[i], self.times[i], self.events[i])

    @property
    def records(self) -> list[SurvivalRecord]:
        return [self.record(i) for i in range(self.n)]

    def take(self, indices, *, require_event: bool = False) -> "Dataset":
        idx = np.asarray(indices, dtype=int)
        return Dataset(
            self.features[idx], self.times[idx], self.events[idx],
            require_event=require_event,
        )


# ---------------------------------------------------------------------------
# step survival functions


@dataclass(frozen=True)
class StepSurvivalFunction:
    """Right-continuous piecewise-constant survival curve.

    ``values[l]`` holds on ``[times[l], times[l+1])``; the curve is
    implicitly 1 on ``[0, times[0])`` and keeps ``values[-1]`` from
    ``times[-1]`` onwards.
    """

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        v = np.array(self.values, dtype=float)
        if t.ndim != 1 or v.shape != t.shape or t.size == 0:
            raise InvalidInputError("times and values must be equal-length 1-d arrays")
        if not np.all(np.isfinite(t)) or t[0] < 0.0 or np.any(np.diff(t) <= 0.0):
            raise InvalidInputError("times must be finite, nonnegative and strictly increasing")
        if not np.all(np.isfinite(v)) or v.min() < 0.0 or v.max() > 1.0:
            raise InvalidInputError("survival values must lie in [0, 1]")
        if np.any(np.diff(v) > 0.0):
            raise InvalidInputError("survival values must be non-increasing")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def value_at(self, t):
        """Survival probability at time(s) ``t`` (right-continuous lookup)."""
        idx = np.searchsorted(self.times, t, side="right")
        full = np.concatenate(([1.0], self.values))
        out = full[idx]
        return float(out) if np.isscalar(t) else out


def expected_time(sf: StepSurvivalFunction) -> float:
    """Mean time implied by a step survival curve.

    Integrates the curve over its own grid, i.e. the sum of
    ``S_l * (t_{l+1} - t_l)`` across grid intervals with the implicit
    ``S_0 = 1`` on ``[0, t_1)``; nothing past the last grid time counts.
    """
    widths = np.diff(np.concatenate(([0.0], sf.times)))
    lead = np.concatenate(([1.0], sf.values[:-1]))
    return float(np.dot(lead, widths))


# ---------------------------------------------------------------------------
# comparable pairs and the C-index


@dataclass(frozen=True)
class ComparablePairSet:
    """Ordered pairs (i, j) with record i uncensored and ``T_i < T_j``."""

    pairs: np.ndarray

    def __post_init__(self):
        p = np.array(self.pairs, dtype=int)
        if p.size == 0:
            p = p.reshape(0, 2)
        if p.ndim != 2 or p.shape[1] != 2:
            raise InvalidInputError("pairs must be a (P, 2) integer array")
        if len(p) and len(np.unique(p, axis=0)) != len(p):
            raise InvalidInputError("pairs must not contain duplicates")
        p.setflags(write=False)
        object.__setattr__(self, "pairs", p)

    def __len__(self) -> int:
        return self.pairs.shape[0]


def build_pairs(ds: Dataset) -> ComparablePairSet:
    """Exhaustively enumerate comparable pairs of a dataset."""
    t, e = ds.times, ds.events
    mask = e[:, None] & (t[:, None] < t[None, :])
    i, j = np.nonzero(mask)
    return ComparablePairSet(np.column_stack([i, j]))


def concordance_from_pairs(predicted_times, ps: ComparablePairSet) -> float:
    """Fraction of comparable pairs ranked correctly by predicted times.

    Ties in predicted times count as discordant (strict inequality).
    """
    if len(ps) == 0:
        raise DegenerateDataError("no comparable pairs: concordance is undefined")
    p = np.asarray(predicted_times, dtype=float)
    i = ps.pairs[:, 0]
    j = ps.pairs[:, 1]
    return float(np.mean(p[i] < p[j]))


def concordance_index(predicted_times, ds: Dataset) -> float:
    """C-index of predicted times against a dataset's comparable pairs."""
    p = np.asarray(predicted_times, dtype=float)
    if p.shape != (ds.n,):
        raise InvalidInputError("predicted_times must have one entry per record")
    return concordance_from_pairs(p, build_pairs(ds))


# ---------------------------------------------------------------------------
# pair reduction


@dataclass(frozen=True)
class PerObjectRandom:
    """Keep one uniformly sampled partner per uncensored object."""


@dataclass(frozen=True)
class NearestTimeNeighbors:
    """Keep, per object, pairs with the k partners of nearest survival time."""

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise InvalidInputError("k must be >= 1")


@dataclass(frozen=True)
class RandomK:
    """Keep K uniformly sampled pairs without replacement."""

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise InvalidInputError("k must be >= 1")


PairStrategy = Union[PerObjectRandom, NearestTimeNeighbors, RandomK]


def reduce_pairs(
    ps: ComparablePairSet, ds: Dataset, strategy: PairStrategy, seed: int
) -> ComparablePairSet:
    """Shrink a pair set with one of the supported sampling strategies.

    The result is always a subset of ``ps`` and is deterministic given the
    seed.  ``RandomK`` with a budget at least ``len(ps)`` returns the input
    unchanged.
    """
    pairs = ps.pairs
    if len(pairs) == 0:
        return ps
    rng = np.random.default_rng(seed)
    if isinstance(strategy, RandomK):
        if strategy.k >= len(pairs):
            return ps
        keep = rng.choice(len(pairs), size=strategy.k, replace=False)
        keep.sort()
        return ComparablePairSet(pairs[keep])
    if isinstance(strategy, PerObjectRandom):
        out = []
        for i in np.unique(pairs[:, 0]):
            partners = pairs[pairs[:, 0] == i, 1]
            out.append((i, rng.choice(partners)))
        return ComparablePairSet(np.array(out, dtype=int))
    if isinstance(strategy, NearestTimeNeighbors):
        t = ds.times
        out = []
        for i in np.unique(pairs[:, 0]):
            partners = pairs[pairs[:, 0] == i, 1]
            gaps = t[partners] - t[i]
            order = np.lexsort((partners, gaps))
            for j in partners[order[: strategy.k]]:
                out.append((i, j))
        rows = np.array(out, dtype=int)
        rows = rows[np.lexsort((rows[:, 1], rows[:, 0]))]
        return ComparablePairSet(rows)
    raise InvalidInputError(f"unknown pair strategy: {strategy!r}")


# ---------------------------------------------------------------------------
# loss terms


def loss_observed(sfs: Sequence[StepSurvivalFunction], ds: Dataset) -> float:
    """Log-likelihood-style penalty over uncensored records.

    For each uncensored record, survival values at the curve's own grid
    times are pushed towards 1 before the recorded time and towards 0
    after it.  Values are clamped into ``[LOG_FLOOR, 1 - LOG_FLOOR]``.
    """
    if len(sfs) != ds.n:
        raise InvalidInputError("need one survival curve per record")
    total = 0.0
    for sf, time, event in zip(sfs, ds.times, ds.events):
        if not event:
            continue
        s = np.clip(sf.values, LOG_FLOOR, 1.0 - LOG_FLOOR)
        before = sf.times <= time
        total -= float(np.sum(np.log(s[before])))
        total -= float(np.sum(np.log1p(-s[~before])))
    return total


def loss_censored(sfs: Sequence[StepSurvivalFunction], ds: Dataset) -> float:
    """Penalty over censored records: survival kept high up to the record time."""
    if len(sfs) != ds.n:
        raise InvalidInputError("need one survival curve per record")
    total = 0.0
    for sf, time, event in zip(sfs, ds.times, ds.events):
        if event:
            continue
        s = np.clip(sf.values, LOG_FLOOR, 1.0 - LOG_FLOOR)
        before = sf.times <= time
        total -= float(np.sum(np.log(s[before])))
    return total


def loss_mae(predicted_times, ds: Dataset) -> float:
    """Mean-absolute-error term over uncensored records only (a sum, not a mean)."""
    p = np.asarray(predicted_times, dtype=float)
    if p.shape != (ds.n,):
        raise InvalidInputError("predicted_times must have one entry per record")
    mask = ds.events
    return float(np.sum(np.abs(ds.times[mask] - p[mask])))


# ---------------------------------------------------------------------------
# paired t-test


def paired_t_test(scores_a, scores_b) -> float:
    """Two-sided p-value of the paired Student t-test.

    Uses n - 1 degrees of freedom.  When the paired differences have zero
    variance the convention is p = 1 for a zero mean difference and p = 0
    otherwise.
    """
    a = np.asarray(scores_a, dtype=float)
    b = np.asarray(scores_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise InvalidInputError("scores must be equal-length 1-d arrays with n >= 2")
    d = a - b
    n = d.size
    sd = float(np.std(d, ddof=1))
    mean = float(np.mean(d))
    if sd == 0.0:
        return 1.0 if mean == 0.0 else 0.0
    t_stat = mean / (sd / math.sqrt(n))
    return float(2.0 * stdtr(n - 1, -abs(t_stat)))

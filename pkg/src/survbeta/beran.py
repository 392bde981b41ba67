"""The weak learner: kernel-weighted conditional survival estimation.

A ``BeranModel`` holds a fixed training subset sorted by time (uncensored
before censored on ties) and produces conditional survival curves through
a weighted product-limit construction; with uniform weights it reduces to
the classical product-limit (Kaplan-Meier) estimator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    Kernel,
    StepSurvivalFunction,
    normalized_weight_rows,
    squared_distances,
)
from .errors import InvalidInputError

#: Below this remaining probability mass the product is continued flat:
#: the estimator is only defined up to the largest weighted event time.
DENOM_FLOOR = 1e-12

#: Each hazard jump is capped at -log of this ratio so jumps stay finite.
CHF_RATIO_FLOOR = 1e-12


def _sort_order(times: np.ndarray, events: np.ndarray) -> np.ndarray:
    # time ascending, uncensored before censored at equal times, then index
    return np.lexsort((np.arange(times.size), ~events, times))


def _grid_indices(times_sorted: np.ndarray) -> np.ndarray:
    # last sorted position of each distinct time
    boundary = np.nonzero(np.diff(times_sorted) > 0.0)[0]
    return np.append(boundary, times_sorted.size - 1)


def _product_limit_rows(alpha: np.ndarray, events: np.ndarray) -> np.ndarray:
    """Cumulative weighted product-limit values, one row per weight vector.

    ``alpha`` has shape (Q, n) with rows on the probability simplex;
    ``events`` has shape (n,).  Returns survival values after each sorted
    record.  Factors whose denominator has fallen below ``DENOM_FLOOR``
    are treated as 1 (the curve continues flat).
    """
    cum_prev = np.cumsum(alpha, axis=1) - alpha
    denom = 1.0 - cum_prev
    live = denom > DENOM_FLOOR
    safe = np.where(live, denom, 1.0)
    factors = np.where(events[None, :] & live, 1.0 - alpha / safe, 1.0)
    np.clip(factors, 0.0, 1.0, out=factors)
    return np.cumprod(factors, axis=1)


@dataclass(frozen=True)
class CumulativeHazard:
    """Non-decreasing step function, implicitly 0 on ``[0, times[0])``."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        v = np.array(self.values, dtype=float)
        if t.ndim != 1 or v.shape != t.shape or t.size == 0:
            raise InvalidInputError("times and values must be equal-length 1-d arrays")
        if np.any(np.diff(t) <= 0.0):
            raise InvalidInputError("times must be strictly increasing")
        if v[0] < 0.0 or np.any(np.diff(v) < 0.0):
            raise InvalidInputError("hazard values must be nonnegative and non-decreasing")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def value_at(self, t):
        idx = np.searchsorted(self.times, t, side="right")
        full = np.concatenate(([0.0], self.values))
        out = full[idx]
        return float(out) if np.isscalar(t) else out


class BeranModel:
    """Conditional survival estimator over a fixed training subset.

    The subset may contain censored-only data (useful for baselines); the
    model is immutable after construction, so concurrent predictions from
    multiple threads are safe.
    """

    def __init__(self, features, times, events, kernel: Kernel):
        f = np.array(features, dtype=float)
        t = np.array(times, dtype=float)
        e = np.array(events, dtype=bool)
        if f.ndim != 2 or f.shape[0] == 0:
            raise InvalidInputError("subset features must be a nonempty (n, d) array")
        n = f.shape[0]
        if t.shape != (n,) or e.shape != (n,):
            raise InvalidInputError("times and events must have one entry per record")
        if not np.all(np.isfinite(f)) or not np.all(np.isfinite(t)) or np.any(t < 0.0):
            raise InvalidInputError("subset data must be finite with nonnegative times")
        order = _sort_order(t, e)
        f, t, e = f[order], t[order], e[order]
        for a in (f, t, e):
            a.setflags(write=False)
        self.features = f
        self.times = t
        self.events = e
        self.kernel = kernel
        self._grid_idx = _grid_indices(t)
        self.grid_times = t[self._grid_idx]
        self.grid_times.setflags(write=False)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def _check_queries(self, queries) -> np.ndarray:
        x = np.asarray(queries, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise InvalidInputError(
                f"queries must have feature dimension {self.dim}, got shape {x.shape}"
            )
        if not np.all(np.isfinite(x)):
            raise InvalidInputError("queries must be finite")
        return x

    def weights(self, queries) -> np.ndarray:
        """Normalized kernel weights over the subset, one row per query."""
        x = self._check_queries(queries)
        d2 = squared_distances(x, self.features)
        return normalized_weight_rows(self.kernel, d2)

    def sf_values(self, queries) -> np.ndarray:
        """Survival values on ``grid_times``, shape (Q, len(grid_times))."""
        alpha = self.weights(queries)
        surv = _product_limit_rows(alpha, self.events)
        return surv[:, self._grid_idx]

    def predict_sf(self, x) -> StepSurvivalFunction:
        """Conditional survival curve at a single query point."""
        vals = self.sf_values(x)[0]
        return StepSurvivalFunction(self.grid_times.copy(), np.clip(vals, 0.0, 1.0))

    def predict_chf(self, x) -> CumulativeHazard:
        """Cumulative hazard at a single query point.

        Consistent with the survival curve: ``exp(-H)`` equals the survival
        value wherever the latter stays above the probability floor.  Jumps
        are capped at ``-log(CHF_RATIO_FLOOR)``.
        """
        alpha = self.weights(x)[0]
        cum_prev = np.cumsum(alpha) - alpha
        denom = 1.0 - cum_prev
        live = denom > DENOM_FLOOR
        safe = np.where(live, denom, 1.0)
        ratio = np.where(
            self.events & live,
            np.clip((denom - alpha) / safe, CHF_RATIO_FLOOR, 1.0),
            1.0,
        )
        jumps = -np.log(ratio)
        hazard = np.cumsum(jumps)
        return CumulativeHazard(self.grid_times.copy(), hazard[self._grid_idx])


def beran_sf(model: BeranModel, x) -> StepSurvivalFunction:
    """Functional alias for :meth:`BeranModel.predict_sf`."""
    return model.predict_sf(x)


def beran_chf(model: BeranModel, x) -> CumulativeHazard:
    """Functional alias for :meth:`BeranModel.predict_chf`."""
    return model.predict_chf(x)


def kaplan_meier(times, events) -> StepSurvivalFunction:
    """Product-limit curve of a subset: the uniform-weight special case."""
    t = np.asarray(times, dtype=float)
    e = np.asarray(events, dtype=bool)
    if t.ndim != 1 or t.size == 0 or e.shape != t.shape:
        raise InvalidInputError("times and events must be equal-length nonempty 1-d arrays")
    order = _sort_order(t, e)
    t, e = t[order], e[order]
    n = t.size
    alpha = np.full((1, n), 1.0 / n)
    surv = _product_limit_rows(alpha, e)[0]
    grid_idx = _grid_indices(t)
    return StepSurvivalFunction(t[grid_idx], np.clip(surv[grid_idx], 0.0, 1.0))

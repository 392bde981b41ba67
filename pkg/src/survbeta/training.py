"""Training of the ensemble's contamination weights.

Builds the pairwise ranking tableau from precomputed weak-learner
predictions, assembles the linear programs (plain ranking form, the
MAE-extended form, and the trainable-contamination form), and provides
two solvers for the simplex-constrained weights: the dense LP route and a
projected-subgradient route for larger instances.  ``fit_survbeta`` wires
everything into the full grid-search pipeline.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from .beran import BeranModel
from .core import (
    ComparablePairSet,
    Dataset,
    Kernel,
    KernelFamily,
    NearestTimeNeighbors,
    PerObjectRandom,
    RandomK,
    build_pairs,
    concordance_from_pairs,
    reduce_pairs,
)
from .data import SplitSpec, Standardizer, split_indices
from .ensemble import (
    EnsembleModel,
    Subsample,
    SurvBetaModel,
    _expected_time_rows,
    _softmax_rows,
    fit_weak_learners,
    generate_subsamples,
    prototype_rows,
    mean_prototype,
)
from .errors import ConfigError, DegenerateDataError, InvalidInputError
from .lp import LinearProgram, LPSolution, solve_lp

DEFAULT_LOG_GRID = (1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3)

#: Above this many hinge/absolute terms the auto solver switches from the
#: dense simplex to the projected subgradient.
LP_SIZE_LIMIT = 400


# ---------------------------------------------------------------------------
# weak-learner precomputation


@dataclass(frozen=True)
class WeakTable:
    """Per-record, per-learner quantities reused across the (w, eps) grid.

    ``expected_times`` integrates each weak curve over its own grid;
    ``horizon_expected`` extends the integral flat to the shared horizon
    (the ranking predictions used for scoring); ``proto_sqdist`` holds the
    squared distance from each record to each subsample's prototype.
    """

    expected_times: np.ndarray
    horizon_expected: np.ndarray
    proto_sqdist: np.ndarray
    horizon: float


def build_weak_table(
    subsamples: list[Subsample],
    ds: Dataset,
    queries,
    prototype_mode: str = "nadaraya-watson",
) -> WeakTable:
    x = np.asarray(queries, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if any(s.beran is None for s in subsamples):
        raise InvalidInputError("subsamples must be fitted before precomputation")
    own_cols, horizon_cols, proto_cols = [], [], []
    horizon = max(s.beran.grid_times[-1] for s in subsamples)
    for s in subsamples:
        vals = s.beran.sf_values(x)
        own_cols.append(_expected_time_rows(s.beran.grid_times, vals, s.beran.grid_times[-1]))
        horizon_cols.append(_expected_time_rows(s.beran.grid_times, vals, horizon))
        if prototype_mode == "mean":
            diff = x - mean_prototype(s, ds)
        else:
            diff = x - prototype_rows(s, ds, x)
        proto_cols.append(np.einsum("qd,qd->q", diff, diff))
    return WeakTable(
        expected_times=np.column_stack(own_cols),
        horizon_expected=np.column_stack(horizon_cols),
        proto_sqdist=np.column_stack(proto_cols),
        horizon=float(horizon),
    )


# ---------------------------------------------------------------------------
# tableau


@dataclass(frozen=True)
class TrainingTableau:
    """All coefficients of the ranking and MAE constraints for one (w, eps).

    Per pair (i, j): ``q_values`` and the per-learner ``r_values``.
    Per uncensored record: ``u_values``, its per-learner expected times and
    its true time.  ``proto_weights`` holds the softmaxed prototype
    distances of every record at temperature w.
    """

    pairs: np.ndarray
    q_values: np.ndarray
    r_values: np.ndarray
    unc_indices: np.ndarray
    u_values: np.ndarray
    unc_expected: np.ndarray
    unc_times: np.ndarray
    proto_weights: np.ndarray
    expected_times: np.ndarray
    epsilon: float
    w: float

    @property
    def m(self) -> int:
        return self.r_values.shape[1]

    @property
    def n_pairs(self) -> int:
        return self.pairs.shape[0]


def build_tableau(
    ds: Dataset,
    weak: WeakTable,
    pairs: ComparablePairSet,
    w: float,
    epsilon: float,
) -> TrainingTableau:
    """Assemble the tableau from precomputed weak predictions."""
    if len(pairs) == 0:
        raise DegenerateDataError("cannot build a training tableau without pairs")
    if not (w > 0.0):
        raise InvalidInputError("w must be positive")
    if not (0.0 <= epsilon <= 1.0):
        raise InvalidInputError("epsilon must lie in [0, 1]")
    that = weak.expected_times
    proto_w = _softmax_rows(-weak.proto_sqdist / w)
    blended = np.sum(proto_w * that, axis=1)
    i = pairs.pairs[:, 0]
    j = pairs.pairs[:, 1]
    q = (1.0 - epsilon) * (blended[i] - blended[j])
    r = that[i] - that[j]
    unc = np.nonzero(ds.events)[0]
    u = (1.0 - epsilon) * proto_w[unc] * that[unc]
    return TrainingTableau(
        pairs=pairs.pairs,
        q_values=q,
        r_values=r,
        unc_indices=unc,
        u_values=u,
        unc_expected=that[unc],
        unc_times=ds.times[unc],
        proto_weights=proto_w,
        expected_times=that,
        epsilon=float(epsilon),
        w=float(w),
    )


# ---------------------------------------------------------------------------
# LP builders


def build_cindex_lp(t: TrainingTableau) -> LinearProgram:
    """Ranking-hinge program: minimize the slack sum over (v, xi).

    Variables are the simplex vector v followed by one slack per pair;
    each pair contributes ``xi_p - eps * r_p . v >= q_p``.
    """
    m, p = t.m, t.n_pairs
    n = m + p
    c = np.concatenate([np.zeros(m), np.ones(p)])
    a = np.zeros((p, n))
    a[:, :m] = -t.epsilon * t.r_values
    a[np.arange(p), m + np.arange(p)] = 1.0
    eq = np.zeros((1, n))
    eq[0, :m] = 1.0
    labels = [f"v{k}" for k in range(m)] + [f"xi{idx}" for idx in range(p)]
    return LinearProgram(
        c=c, a_ineq=a, b_ineq=t.q_values.copy(), senses=np.ones(p, dtype=int),
        a_eq=eq, b_eq=np.array([1.0]), labels=labels,
    )


def build_cindex_mae_lp(t: TrainingTableau) -> LinearProgram:
    """Ranking program extended with absolute-error slacks for uncensored records."""
    m, p = t.m, t.n_pairs
    n_unc = t.unc_indices.size
    n = m + p + n_unc
    c = np.concatenate([np.zeros(m), np.ones(p + n_unc)])
    rows = np.zeros((p + 2 * n_unc, n))
    rhs = np.zeros(p + 2 * n_unc)
    rows[:p, :m] = -t.epsilon * t.r_values
    rows[np.arange(p), m + np.arange(p)] = 1.0
    rhs[:p] = t.q_values
    u_sum = t.u_values.sum(axis=1)
    for k, (that_i, u_i, t_i) in enumerate(zip(t.unc_expected, u_sum, t.unc_times)):
        lo = p + 2 * k
        hi = lo + 1
        rows[lo, :m] = -t.epsilon * that_i
        rows[lo, m + p + k] = 1.0
        rhs[lo] = u_i - t_i
        rows[hi, :m] = t.epsilon * that_i
        rows[hi, m + p + k] = 1.0
        rhs[hi] = t_i - u_i
    eq = np.zeros((1, n))
    eq[0, :m] = 1.0
    labels = (
        [f"v{k}" for k in range(m)]
        + [f"xi{idx}" for idx in range(p)]
        + [f"psi{idx}" for idx in range(n_unc)]
    )
    return LinearProgram(
        c=c, a_ineq=rows, b_ineq=rhs, senses=np.ones(len(rhs), dtype=int),
        a_eq=eq, b_eq=np.array([1.0]), labels=labels,
    )


def build_trainable_eps_lp(
    ds: Dataset, weak: WeakTable, pairs: ComparablePairSet, w: float
) -> LinearProgram:
    """Program over (beta, eps, xi, psi) where ``beta_k = eps * v_k``.

    The contamination level becomes a variable: tableau entries carrying a
    ``1 - eps`` factor are split into a constant part and an eps-linear
    part so every constraint stays linear.  Recover the simplex vector
    with :func:`recover_trainable_eps`.
    """
    base = build_tableau(ds, weak, pairs, w, epsilon=0.0)
    m, p = base.m, base.n_pairs
    n_unc = base.unc_indices.size
    n = m + 1 + p + n_unc
    eps_col = m
    xi0 = m + 1
    psi0 = m + 1 + p
    c = np.zeros(n)
    c[xi0:] = 1.0
    rows = np.zeros((p + 2 * n_unc, n))
    rhs = np.zeros(p + 2 * n_unc)
    rows[:p, :m] = -base.r_values
    rows[:p, eps_col] = base.q_values
    rows[np.arange(p), xi0 + np.arange(p)] = 1.0
    rhs[:p] = base.q_values
    d_unc = base.u_values.sum(axis=1)  # at eps=0 this is sum_k P_i^k That_i^k
    for k, (that_i, d_i, t_i) in enumerate(zip(base.unc_expected, d_unc, base.unc_times)):
        lo = p + 2 * k
        hi = lo + 1
        rows[lo, :m] = -that_i
        rows[lo, eps_col] = d_i
        rows[lo, psi0 + k] = 1.0
        rhs[lo] = d_i - t_i
        rows[hi, :m] = that_i
        rows[hi, eps_col] = -d_i
        rows[hi, psi0 + k] = 1.0
        rhs[hi] = t_i - d_i
    eq = np.zeros((1, n))
    eq[0, :m] = 1.0
    eq[0, eps_col] = -1.0
    upper = np.full(n, np.inf)
    upper[eps_col] = 1.0
    labels = (
        [f"beta{k}" for k in range(m)]
        + ["eps"]
        + [f"xi{idx}" for idx in range(p)]
        + [f"psi{idx}" for idx in range(n_unc)]
    )
    return LinearProgram(
        c=c, a_ineq=rows, b_ineq=rhs, senses=np.ones(len(rhs), dtype=int),
        a_eq=eq, b_eq=np.array([0.0]), upper=upper, labels=labels,
    )


def recover_trainable_eps(solution: LPSolution, m: int) -> tuple[np.ndarray, float]:
    """Split a trainable-contamination solution into (v, eps).

    When the optimum drives eps to zero the simplex vector is undetermined
    and the uniform vector is returned by convention.
    """
    beta = np.clip(solution.x[:m], 0.0, None)
    eps = float(np.clip(solution.x[m], 0.0, 1.0))
    if eps > 1e-9:
        v = beta / beta.sum() if beta.sum() > 0 else np.full(m, 1.0 / m)
    else:
        v = np.full(m, 1.0 / m)
    return v, eps


# ---------------------------------------------------------------------------
# regularized projected-subgradient solver


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=float)
    n = v.size
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u * np.arange(1, n + 1) > css)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def regularized_objective(t: TrainingTableau, v: np.ndarray, lam: float) -> float:
    """Hinge sum plus absolute-error sum plus ``lam * ||v||^2`` at ``v``."""
    g = t.q_values + t.epsilon * (t.r_values @ v)
    value = float(np.sum(np.maximum(0.0, g)))
    if t.unc_indices.size:
        resid = t.u_values.sum(axis=1) + t.epsilon * (t.unc_expected @ v) - t.unc_times
        value += float(np.sum(np.abs(resid)))
    return value + lam * float(v @ v)


def _subgradient(t: TrainingTableau, v: np.ndarray, lam: float) -> np.ndarray:
    g = t.q_values + t.epsilon * (t.r_values @ v)
    grad = t.epsilon * (t.r_values.T @ (g > 0.0).astype(float))
    if t.unc_indices.size:
        resid = t.u_values.sum(axis=1) + t.epsilon * (t.unc_expected @ v) - t.unc_times
        grad += t.epsilon * (t.unc_expected.T @ np.sign(resid))
    return grad + 2.0 * lam * v


def solve_regularized(
    t: TrainingTableau,
    lam: float = 0.0,
    step_schedule=None,
    iterations: int = 3000,
) -> tuple[np.ndarray, float]:
    """Minimize the (optionally regularized) objective over the simplex.

    Projected subgradient with normalized directions and a geometrically
    shrinking step ladder; the best iterate is tracked, so the returned
    objective never exceeds the uniform-start value.  ``step_schedule``
    may supply explicit per-iteration step sizes.
    """
    if lam < 0.0:
        raise InvalidInputError("lam must be nonnegative")
    m = t.m
    v = np.full(m, 1.0 / m)
    best_v = v.copy()
    best_f = regularized_objective(t, v, lam)
    if step_schedule is None:
        stages = 30
        per_stage = max(1, iterations // stages)
        steps = np.sqrt(2.0) * 0.5 ** (np.arange(iterations) // per_stage)
    else:
        steps = np.asarray(list(step_schedule), dtype=float)
        iterations = steps.size
    for k in range(iterations):
        grad = _subgradient(t, v, lam)
        norm = float(np.linalg.norm(grad))
        if norm == 0.0:
            break
        v = project_simplex(v - steps[k] * grad / norm)
        f = regularized_objective(t, v, lam)
        if f < best_f:
            best_f = f
            best_v = v.copy()
    return best_v, best_f


# ---------------------------------------------------------------------------
# the fit pipeline


@dataclass
class FitConfig:
    """Everything the grid-search pipeline needs; all fields have defaults.

    ``variant`` selects the model family: a single kernel estimator with a
    tuned bandwidth, the plain-bagging ensemble, the softmax-only ensemble
    (eps fixed at 0) or the fully trained ensemble.
    """

    variant: str = "survbeta-opt"
    m_estimators: int = 20
    k_fraction: float = 0.4
    tau_grid: tuple = DEFAULT_LOG_GRID
    eta: float = 1.0
    prototype_mode: str = "nadaraya-watson"
    w_grid: tuple = DEFAULT_LOG_GRID
    eps_grid: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    trainable_eps: bool = False
    objective: str = "cindex-mae"  # or "cindex"
    regularization: float = 0.0
    solver: str = "auto"  # auto | simplex | subgradient
    pair_strategy: str = "random-k"  # none | per-object-random | nearest-time | random-k
    pair_budget: int | None = None
    pair_neighbors: int = 5
    val_fraction: float = 0.25
    subgradient_iterations: int = 600
    seed: int = 0

    VARIANTS = ("beran-single", "survbeta-noopt", "survbeta-opt", "bagging")

    def validate(self) -> None:
        if self.variant not in self.VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {self.VARIANTS}")
        if self.m_estimators < 1:
            raise ConfigError("m_estimators must be >= 1")
        if not (0.0 < self.k_fraction <= 1.0):
            raise ConfigError("k_fraction must lie in (0, 1]")
        for name, grid in (("tau_grid", self.tau_grid), ("w_grid", self.w_grid)):
            if len(grid) == 0:
                raise ConfigError(f"{name} must be nonempty")
            if any(g <= 0 for g in grid):
                raise ConfigError(f"{name} entries must be positive")
        if not self.trainable_eps:
            if len(self.eps_grid) == 0:
                raise ConfigError("eps_grid must be nonempty")
            if any(not (0.0 <= e <= 1.0) for e in self.eps_grid):
                raise ConfigError("eps_grid entries must lie in [0, 1]")
        if self.objective not in ("cindex", "cindex-mae"):
            raise ConfigError("objective must be 'cindex' or 'cindex-mae'")
        if self.prototype_mode not in ("nadaraya-watson", "mean"):
            raise ConfigError("prototype_mode must be 'nadaraya-watson' or 'mean'")
        if self.solver not in ("auto", "simplex", "subgradient"):
            raise ConfigError("solver must be auto, simplex or subgradient")
        if self.pair_strategy not in ("none", "per-object-random", "nearest-time", "random-k"):
            raise ConfigError(f"unknown pair_strategy {self.pair_strategy!r}")
        if not (0.0 <= self.val_fraction < 1.0):
            raise ConfigError("val_fraction must lie in [0, 1)")
        if self.regularization < 0.0:
            raise ConfigError("regularization must be nonnegative")
        if self.eta <= 0.0:
            raise ConfigError("eta must be positive")


def _reduce_training_pairs(pairs, ds, cfg: FitConfig, seed: int):
    if cfg.pair_strategy == "none":
        return pairs
    if cfg.pair_strategy == "per-object-random":
        return reduce_pairs(pairs, ds, PerObjectRandom(), seed)
    if cfg.pair_strategy == "nearest-time":
        return reduce_pairs(pairs, ds, NearestTimeNeighbors(cfg.pair_neighbors), seed)
    budget = cfg.pair_budget if cfg.pair_budget is not None else 50 * ds.n
    budget = min(budget, len(pairs))
    if budget < 1:
        return pairs
    return reduce_pairs(pairs, ds, RandomK(budget), seed)


def _train_weights(tableau: TrainingTableau, cfg: FitConfig) -> tuple[np.ndarray, dict]:
    """Solve for v at one grid point; returns (v, solver info)."""
    size = tableau.n_pairs + 2 * tableau.unc_indices.size
    solver = cfg.solver
    if solver == "auto":
        solver = "simplex" if size <= LP_SIZE_LIMIT else "subgradient"
    if solver == "simplex":
        if cfg.objective == "cindex":
            program = build_cindex_lp(tableau)
        else:
            program = build_cindex_mae_lp(tableau)
        sol = solve_lp(program)
        v = np.clip(sol.x[: tableau.m], 0.0, None)
        v = v / v.sum() if v.sum() > 0 else np.full(tableau.m, 1.0 / tableau.m)
        return v, {"solver": "simplex", "iterations": sol.iterations, "objective": sol.objective}
    include_mae = cfg.objective == "cindex-mae"
    v, obj = solve_regularized(
        _strip_mae(tableau) if not include_mae else tableau,
        lam=cfg.regularization,
        iterations=cfg.subgradient_iterations,
    )
    return v, {"solver": "subgradient", "iterations": cfg.subgradient_iterations, "objective": obj}


def _strip_mae(t: TrainingTableau) -> TrainingTableau:
    empty = np.zeros((0, t.m))
    return TrainingTableau(
        pairs=t.pairs,
        q_values=t.q_values,
        r_values=t.r_values,
        unc_indices=np.zeros(0, dtype=int),
        u_values=empty,
        unc_expected=empty,
        unc_times=np.zeros(0),
        proto_weights=t.proto_weights,
        expected_times=t.expected_times,
        epsilon=t.epsilon,
        w=t.w,
    )


def _score(gamma: np.ndarray, horizon_expected: np.ndarray, pairs: ComparablePairSet) -> float:
    predicted = np.sum(gamma * horizon_expected, axis=1)
    return concordance_from_pairs(predicted, pairs)


def _local_pair_subset(pairs: ComparablePairSet, features, center, radius_sq) -> ComparablePairSet:
    d2 = np.sum((features - center) ** 2, axis=1)
    inside = d2 <= radius_sq
    if not inside.any():
        return ComparablePairSet(np.zeros((0, 2), dtype=int))
    keep = inside[pairs.pairs[:, 0]] & inside[pairs.pairs[:, 1]]
    return ComparablePairSet(pairs.pairs[keep])


def _weak_expected_times(beran, queries) -> np.ndarray:
    vals = beran.sf_values(queries)
    return _expected_time_rows(beran.grid_times, vals, beran.grid_times[-1])


def tune_weak_bandwidths(
    subsamples: list[Subsample],
    train: Dataset,
    tau_grid,
    eval_data: Dataset | None,
    eval_pairs: ComparablePairSet,
) -> None:
    """Pick each weak learner's bandwidth by enumeration over ``tau_grid``.

    A learner is scored on ranking pairs near its own coverage region
    (distance to the member mean within the subsample's squared radius),
    falling back to all evaluation pairs when the region holds too few.
    Without held-out data, evaluation uses training records outside the
    subsample, which keeps the criterion out-of-sample for the learner.
    Each subsample's kernel and fitted estimator are updated in place;
    ties prefer the smallest bandwidth.
    """
    min_local_pairs = 10
    for s in subsamples:
        members = train.features[s.indices]
        center = members.mean(axis=0)
        radius_sq = float(np.max(np.sum((members - center) ** 2, axis=1)))
        if eval_data is not None:
            candidates = [
                _local_pair_subset(eval_pairs, eval_data.features, center, radius_sq),
                eval_pairs,
            ]
            queries = eval_data.features
        else:
            oob = np.setdiff1d(np.arange(train.n), s.indices)
            if oob.size:
                oob_ds = train.take(oob)
                oob_pairs = build_pairs(oob_ds)
                candidates = [
                    _local_pair_subset(oob_pairs, oob_ds.features, center, radius_sq),
                    oob_pairs,
                ]
                queries = oob_ds.features
            else:
                candidates = [eval_pairs]
                queries = train.features
        pairs = next((p for p in candidates if len(p) >= min_local_pairs), candidates[-1])
        if len(pairs) == 0:
            continue  # nothing to score against; keep the drawn bandwidth
        best = None
        for tau in sorted(tau_grid):
            model = BeranModel(
                members, train.times[s.indices], train.events[s.indices],
                Kernel(s.kernel.family, tau),
            )
            score = concordance_from_pairs(_weak_expected_times(model, queries), pairs)
            if best is None or score > best[0]:
                best = (score, tau, model)
        s.kernel = Kernel(s.kernel.family, best[1])
        s.beran = best[2]


def fit_survbeta(ds: Dataset, config: FitConfig) -> SurvBetaModel:
    """Grid-search fit of the configured model variant.

    Pipeline: split off a validation part, standardize with train-only
    statistics, generate and fit the weak learners, precompute their
    predictions, then walk the hyperparameter grid (training the simplex
    weights where the variant calls for it) and keep the point with the
    best validation C-index.  Ties prefer the smallest contamination, then
    the smallest temperature.  Deterministic for a fixed seed.
    """
    config.validate()
    started = time.perf_counter()
    seeds = np.random.SeedSequence(config.seed).generate_state(4)
    split_seed, subsample_seed, pair_seed = int(seeds[0]), int(seeds[1]), int(seeds[2])

    train_idx, val_idx, _ = split_indices(
        ds.n, SplitSpec(1.0 - config.val_fraction, config.val_fraction, 0.0, split_seed)
    )
    raw_train = ds.take(train_idx)
    if not raw_train.events.any():
        raise DegenerateDataError("training part holds no uncensored record")
    scaler = Standardizer.fit(raw_train.features)
    train = Dataset(
        scaler.transform(raw_train.features), raw_train.times, raw_train.events,
        require_event=False,
    )
    warnings: list[str] = []
    if val_idx.size:
        raw_val = ds.take(val_idx)
        val = Dataset(
            scaler.transform(raw_val.features), raw_val.times, raw_val.events,
            require_event=False,
        )
        val_pairs = build_pairs(val)
    else:
        val = None
        val_pairs = ComparablePairSet(np.zeros((0, 2), dtype=int))
    train_pairs_full = build_pairs(train)
    if len(val_pairs) == 0:
        warnings.append("validation pairs empty; selection falls back to training C-index")
        score_on_train = True
    else:
        score_on_train = False

    report: dict = {
        "variant": config.variant,
        "n_train": int(train.n),
        "n_val": int(val.n) if val is not None else 0,
        "grid": [],
        "warnings": warnings,
        "config": asdict(config),
    }

    if config.variant == "beran-single":
        model = _fit_single(train, val, val_pairs, train_pairs_full, score_on_train, config, report)
    elif config.variant == "bagging":
        model = _fit_bagging(train, val, val_pairs, score_on_train, config, subsample_seed, report)
    else:
        model = _fit_ensemble(
            train, val, val_pairs, train_pairs_full, score_on_train,
            config, subsample_seed, pair_seed, report,
        )

    report["wall_time_s"] = time.perf_counter() - started
    return SurvBetaModel(
        ensemble=model,
        train_data=train,
        scaler=scaler,
        variant=config.variant,
        report=report,
    )


def _fit_single(train, val, val_pairs, train_pairs, score_on_train, cfg, report):
    all_idx = np.arange(train.n)
    best = None
    for tau in sorted(cfg.tau_grid):
        sub = Subsample(all_idx, Kernel(KernelFamily.GAUSSIAN, tau), cfg.eta)
        fit_weak_learners(train, [sub])
        queries = train.features if score_on_train else val.features
        pairs = train_pairs if score_on_train else val_pairs
        vals = sub.beran.sf_values(queries)
        predicted = _expected_time_rows(sub.beran.grid_times, vals, sub.beran.grid_times[-1])
        score = concordance_from_pairs(predicted, pairs)
        train_vals = sub.beran.sf_values(train.features)
        train_pred = _expected_time_rows(sub.beran.grid_times, train_vals, sub.beran.grid_times[-1])
        entry = {
            "tau": tau,
            "val_cindex": score,
            "train_cindex": concordance_from_pairs(train_pred, train_pairs),
        }
        report["grid"].append(entry)
        if best is None or score > best[0]:
            best = (score, sub)
    report["chosen"] = {"tau": best[1].kernel.bandwidth, "val_cindex": best[0]}
    return EnsembleModel(
        subsamples=[best[1]], w=1.0, epsilon=0.0, v=np.array([1.0]),
        prototype_mode=cfg.prototype_mode,
    )


def _prepare_weak_learners(train, val, val_pairs, score_on_train, cfg, subsample_seed):
    k = max(1, min(train.n, round(cfg.k_fraction * train.n)))
    subsamples = generate_subsamples(
        train, cfg.m_estimators, k, subsample_seed,
        tau_choices=cfg.tau_grid, eta=cfg.eta,
    )
    fit_weak_learners(train, subsamples)
    eval_data = None if score_on_train else val
    tune_weak_bandwidths(subsamples, train, cfg.tau_grid, eval_data, val_pairs)
    return subsamples


def _fit_bagging(train, val, val_pairs, score_on_train, cfg, subsample_seed, report):
    subsamples = _prepare_weak_learners(
        train, val, val_pairs, score_on_train, cfg, subsample_seed
    )
    m = len(subsamples)
    report["chosen"] = {"m": m}
    return EnsembleModel(
        subsamples=subsamples, w=1.0, epsilon=1.0, v=np.full(m, 1.0 / m),
        prototype_mode=cfg.prototype_mode,
    )


def _fit_ensemble(
    train, val, val_pairs, train_pairs_full, score_on_train,
    cfg, subsample_seed, pair_seed, report,
):
    subsamples = _prepare_weak_learners(
        train, val, val_pairs, score_on_train, cfg, subsample_seed
    )
    m = len(subsamples)
    table_train = build_weak_table(subsamples, train, train.features, cfg.prototype_mode)
    if score_on_train:
        table_score, score_pairs = table_train, train_pairs_full
    else:
        table_score = build_weak_table(subsamples, train, val.features, cfg.prototype_mode)
        score_pairs = val_pairs

    optimize = cfg.variant == "survbeta-opt"
    uniform = np.full(m, 1.0 / m)
    reduced = None
    if optimize:
        reduced = _reduce_training_pairs(train_pairs_full, train, cfg, pair_seed)

    best = None  # (score, eps, w, v, info)
    eps_values = [0.0] if not optimize else (
        ["trainable"] if cfg.trainable_eps else sorted(cfg.eps_grid)
    )
    for eps in eps_values:
        for w in sorted(cfg.w_grid):
            if not optimize:
                v, eps_val, info = uniform, 0.0, {"solver": "none", "iterations": 0}
            elif eps == "trainable":
                program = build_trainable_eps_lp(train, table_train, reduced, w)
                sol = solve_lp(program)
                v, eps_val = recover_trainable_eps(sol, m)
                info = {"solver": "simplex", "iterations": sol.iterations, "objective": sol.objective}
            else:
                eps_val = float(eps)
                if eps_val == 0.0:
                    # weights do not enter the attention at eps=0
                    v, info = uniform, {"solver": "none", "iterations": 0}
                else:
                    tableau = build_tableau(train, table_train, reduced, w, eps_val)
                    v, info = _train_weights(tableau, cfg)
            p_score = _softmax_rows(-table_score.proto_sqdist / w)
            gamma_score = (1.0 - eps_val) * p_score + eps_val * v[None, :]
            score = _score(gamma_score, table_score.horizon_expected, score_pairs)
            p_train = _softmax_rows(-table_train.proto_sqdist / w)
            gamma_train = (1.0 - eps_val) * p_train + eps_val * v[None, :]
            train_score = _score(gamma_train, table_train.horizon_expected, train_pairs_full)
            report["grid"].append(
                {
                    "w": w,
                    "epsilon": eps_val,
                    "val_cindex": score,
                    "train_cindex": train_score,
                    "solver": info.get("solver"),
                    "solver_iterations": info.get("iterations"),
                }
            )
            if best is None or score > best[0]:
                best = (score, eps_val, w, v, info)

    score, eps_val, w, v, info = best
    report["chosen"] = {"w": w, "epsilon": eps_val, "val_cindex": score}
    return EnsembleModel(
        subsamples=subsamples, w=w, epsilon=eps_val, v=v,
        prototype_mode=cfg.prototype_mode,
    )

import math

import numpy as np
import pytest

from survbeta.beran import BeranModel, beran_chf, beran_sf, kaplan_meier
from survbeta.core import Kernel, StepSurvivalFunction
from survbeta.errors import InvalidInputError


def _km_oracle(times, events):
    """Textbook risk-set product-limit estimator (independent of the model)."""
    distinct = sorted(set(times))
    s = 1.0
    out = []
    for t in distinct:
        at_risk = sum(1 for x in times if x >= t)
        deaths = sum(1 for x, e in zip(times, events) if x == t and e)
        s *= 1.0 - deaths / at_risk
        out.append(s)
    return np.array(distinct), np.array(out)


def _beran_oracle(features, times, events, kernel, x):
    """Straight-line product formula with explicit loops."""
    order = sorted(
        range(len(times)), key=lambda i: (times[i], not events[i], i)
    )
    feats = [features[i] for i in order]
    tt = [times[i] for i in order]
    ee = [events[i] for i in order]
    raws = []
    for f in feats:
        d2 = sum((a - b) ** 2 for a, b in zip(x, f))
        if kernel.family.value == "gaussian":
            raws.append(math.exp(-d2 / kernel.bandwidth))
        else:
            raise NotImplementedError
    total = sum(raws)
    alphas = [r / total for r in raws]
    cum = 0.0
    s = 1.0
    curve = {}
    for a, t, e in zip(alphas, tt, ee):
        denom = 1.0 - cum
        if e and denom > 1e-12:
            s *= 1.0 - a / denom
        cum += a
        curve[t] = max(s, 0.0)
    grid = sorted(curve)
    return np.array(grid), np.array([curve[t] for t in grid])


def test_single_uncensored_record():
    m = BeranModel([[0.0]], [3.0], [True], Kernel("gaussian", 1.0))
    sf = m.predict_sf(np.array([0.7]))
    assert np.array_equal(sf.times, [3.0])
    assert np.array_equal(sf.values, [0.0])
    assert sf.value_at(2.999) == 1.0
    assert sf.value_at(3.0) == 0.0


def test_kaplan_meier_simple_arithmetic():
    sf = kaplan_meier([1.0, 2.0, 3.0], [True, True, True])
    assert np.allclose(sf.values, [2 / 3, 1 / 3, 0.0])
    assert sf.value_at(0.5) == 1.0


def test_kaplan_meier_all_censored_is_flat_one():
    sf = kaplan_meier([1.0, 2.0, 3.0], [False, False, False])
    assert np.all(sf.values == 1.0)


def test_kaplan_meier_matches_textbook_oracle():
    rng = np.random.default_rng(13)
    for _ in range(25):
        n = int(rng.integers(2, 9))
        times = np.round(rng.uniform(0.5, 4.0, size=n), 1)  # provoke ties
        events = rng.random(n) < 0.7
        sf = kaplan_meier(times, events)
        grid, values = _km_oracle(times.tolist(), events.tolist())
        assert np.array_equal(sf.times, grid)
        assert np.allclose(sf.values, values, atol=1e-12)


def test_uniform_weights_reduce_to_kaplan_meier():
    rng = np.random.default_rng(17)
    for _ in range(25):
        n = int(rng.integers(2, 12))
        times = rng.uniform(0.1, 5.0, size=n)
        events = rng.random(n) < 0.6
        # identical features force exactly uniform Gaussian weights
        feats = np.tile(rng.normal(size=2), (n, 1))
        model = BeranModel(feats, times, events, Kernel("gaussian", 1.0))
        sf = model.predict_sf(feats[0])
        km = kaplan_meier(times, events)
        assert np.array_equal(sf.times, km.times)
        assert np.max(np.abs(sf.values - km.values)) <= 1e-12


def test_far_query_compact_kernel_reduces_to_kaplan_meier():
    rng = np.random.default_rng(19)
    feats = rng.normal(size=(6, 2))
    times = rng.uniform(0.5, 3.0, size=6)
    events = np.array([1, 0, 1, 1, 0, 1], dtype=bool)
    model = BeranModel(feats, times, events, Kernel("epanechnikov", 0.01))
    sf = model.predict_sf(np.array([50.0, 50.0]))  # all raw weights are zero
    km = kaplan_meier(times, events)
    assert np.max(np.abs(sf.values - km.values)) <= 1e-12


def test_beran_matches_direct_product_oracle():
    rng = np.random.default_rng(23)
    for _ in range(20):
        feats = rng.normal(size=(5, 3))
        times = rng.uniform(0.2, 4.0, size=5)
        events = np.append(rng.random(4) < 0.7, True)
        kernel = Kernel("gaussian", 1.0)
        model = BeranModel(feats, times, events, kernel)
        x = rng.normal(size=3)
        sf = model.predict_sf(x)
        grid, values = _beran_oracle(feats, times, events, kernel, x)
        assert np.allclose(sf.times, grid)
        assert np.max(np.abs(sf.values - values)) <= 1e-12


def test_locality_concentrated_weight_gives_single_record_step():
    feats = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
    times = np.array([2.0, 1.0, 3.0])
    events = np.array([True, True, True])
    model = BeranModel(feats, times, events, Kernel("quartic", 0.5))
    sf = model.predict_sf(feats[0])  # weight 1 on the coincident record
    assert sf.value_at(1.999) == 1.0
    assert sf.value_at(2.0) == 0.0


def test_permutation_invariance():
    rng = np.random.default_rng(29)
    feats = rng.normal(size=(7, 2))
    times = rng.uniform(0.1, 5.0, size=7)
    events = rng.random(7) < 0.6
    kernel = Kernel("gaussian", 0.8)
    base = BeranModel(feats, times, events, kernel)
    perm = rng.permutation(7)
    shuffled = BeranModel(feats[perm], times[perm], events[perm], kernel)
    x = rng.normal(size=2)
    a, b = base.predict_sf(x), shuffled.predict_sf(x)
    assert np.array_equal(a.times, b.times)
    assert np.array_equal(a.values, b.values)


def test_tie_handling_uncensored_first():
    # two records at the same time: the censored one stays in the risk set
    # while the event is processed, so S drops to 1/2 with uniform weights
    feats = np.zeros((2, 1))
    sf = kaplan_meier([2.0, 2.0], [True, False])
    assert np.array_equal(sf.times, [2.0])
    assert sf.values[0] == pytest.approx(0.5, abs=1e-15)
    model = BeranModel(feats, [2.0, 2.0], [False, True], Kernel("gaussian", 1.0))
    sfb = model.predict_sf(np.array([0.0]))
    assert sfb.values[0] == pytest.approx(0.5, abs=1e-12)


def test_emitted_sf_invariants_hold():
    rng = np.random.default_rng(31)
    for _ in range(25):
        n = int(rng.integers(1, 15))
        feats = rng.normal(size=(n, 2))
        times = rng.uniform(0, 4, size=n)
        events = rng.random(n) < 0.5
        family = rng.choice(["gaussian", "epanechnikov", "triangular", "quartic"])
        model = BeranModel(feats, times, events, Kernel(family, 10 ** rng.uniform(-2, 2)))
        sf = model.predict_sf(rng.normal(size=2))
        assert isinstance(sf, StepSurvivalFunction)  # validation ran in the constructor


def test_dimension_mismatch_raises():
    model = BeranModel(np.zeros((3, 2)), [1.0, 2.0, 3.0], [True] * 3, Kernel("gaussian", 1.0))
    with pytest.raises(InvalidInputError):
        model.predict_sf(np.zeros(3))


# ---------------------------------------------------------------------------
# cumulative hazard


def test_chf_single_record_capped_jump():
    model = BeranModel([[0.0]], [3.0], [True], Kernel("gaussian", 1.0))
    chf = model.predict_chf(np.array([0.0]))
    assert chf.value_at(2.9) == 0.0
    assert chf.value_at(3.0) == pytest.approx(-math.log(1e-12), rel=1e-12)


def test_chf_all_censored_is_zero():
    model = BeranModel(np.zeros((4, 1)), [1.0, 2.0, 3.0, 4.0], [False] * 4, Kernel("gaussian", 1.0))
    chf = model.predict_chf(np.array([0.0]))
    assert np.all(chf.values == 0.0)


def test_chf_consistent_with_sf():
    rng = np.random.default_rng(37)
    for _ in range(20):
        n = int(rng.integers(2, 10))
        feats = rng.normal(size=(n, 2))
        times = rng.uniform(0.1, 5.0, size=n)
        events = rng.random(n) < 0.7
        model = BeranModel(feats, times, events, Kernel("gaussian", 1.5))
        x = rng.normal(size=2)
        sf = beran_sf(model, x)
        chf = beran_chf(model, x)
        mask = sf.values > 1e-12
        assert np.allclose(np.exp(-chf.values[mask]), sf.values[mask], atol=1e-9)
        assert np.all(np.diff(chf.values) >= 0.0)

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from discreteclf import InterpretabilitySet, dataset_from_arrays
from discreteclf.benders import (
    LOSS_KINDS,
    BendersOptions,
    CutPool,
    LossOracle,
    benders_solve,
    convex_objective,
    oracle_eval,
)


def gaussian_instance(N: int, P: int, seed: int):
    rng = np.random.default_rng(seed)
    y = np.where(np.arange(N) % 2 == 0, 1, -1)
    X = rng.normal(size=(N, P)) + np.where(y[:, None] == 1, 2.0, 0.0)
    return dataset_from_arrays(X, y)


def test_logistic_at_zero():
    ds = gaussian_instance(40, 3, 0)
    v, g = oracle_eval("logistic", np.zeros(4), ds)
    assert v == pytest.approx(math.log(2))
    assert np.allclose(g, -(ds.y[:, None] * ds.X).sum(axis=0) / (2 * ds.N))


def test_hinge_flat_region():
    X = np.array([[3.0], [-3.0]])
    ds = dataset_from_arrays(X, [1, -1])
    v, g = oracle_eval("hinge", [0.0, 1.0], ds)
    assert v == 0.0 and np.all(g == 0.0)


def test_unknown_kind_and_bad_input():
    ds = gaussian_instance(4, 1, 0)
    with pytest.raises(ValueError):
        LossOracle("cubic", ds)
    with pytest.raises(ValueError):
        oracle_eval("logistic", [0.0], ds)
    with pytest.raises(ValueError):
        oracle_eval("logistic", [np.nan, 0.0], ds)


@pytest.mark.parametrize("kind", ["quadratic", "logistic", "exponential"])
def test_gradient_matches_finite_differences(kind):
    ds = gaussian_instance(60, 3, 1)
    rng = np.random.default_rng(7)
    h = 1e-6
    for _ in range(5):
        lam = rng.uniform(-1, 1, size=4)
        v, g = oracle_eval(kind, lam, ds)
        for j in range(4):
            e = np.zeros(4)
            e[j] = h
            fd = (oracle_eval(kind, lam + e, ds)[0] - oracle_eval(kind, lam - e, ds)[0]) / (2 * h)
            assert fd == pytest.approx(g[j], rel=1e-5, abs=1e-7)


def test_hinge_subgradient_inequality():
    ds = gaussian_instance(50, 2, 2)
    rng = np.random.default_rng(3)
    for _ in range(20):
        a, b = rng.normal(size=3), rng.normal(size=3)
        va, ga = oracle_eval("hinge", a, ds)
        vb, _ = oracle_eval("hinge", b, ds)
        assert vb >= va + ga @ (b - a) - 1e-12


@settings(max_examples=40, deadline=None)
@given(
    st.sampled_from(LOSS_KINDS),
    st.lists(st.floats(-3, 3), min_size=3, max_size=3),
    st.lists(st.floats(-3, 3), min_size=3, max_size=3),
    st.floats(0, 1),
)
def test_losses_are_convex_and_nonnegative(kind, a, b, t):
    ds = gaussian_instance(30, 2, 4)
    a, b = np.array(a), np.array(b)
    fa, fb = oracle_eval(kind, a, ds)[0], oracle_eval(kind, b, ds)[0]
    fm = oracle_eval(kind, t * a + (1 - t) * b, ds)[0]
    assert min(fa, fb, fm) >= 0
    assert fm <= t * fa + (1 - t) * fb + 1e-9 * (1 + abs(fa) + abs(fb))


def test_cut_pool_underestimates():
    ds = gaussian_instance(50, 2, 5)
    oracle = LossOracle("logistic", ds)
    rng = np.random.default_rng(0)
    pool = CutPool()
    for _ in range(8):
        p = rng.normal(size=3)
        pool.add(p, *oracle(p))
    for _ in range(50):
        q = rng.normal(size=3) * 3
        assert pool.model(q) <= oracle(q)[0] + 1e-12


def test_reproducible_bitwise():
    ds = gaussian_instance(1000, 4, 6)
    lam = np.array([0.3, -0.2, 0.1, 0.5, -1.0])
    assert oracle_eval("logistic", lam, ds) [0] == oracle_eval("logistic", lam, ds)[0]


def test_benders_small_matches_enumeration(tmp_path):
    ds = gaussian_instance(200, 2, 8)
    L = InterpretabilitySet.bounded(2, 3)
    C0 = 0.9 / ds.N
    res = benders_solve(ds, "logistic", L, C0=C0, opts=BendersOptions(gap_tol=1e-6))
    oracle = LossOracle("logistic", ds)
    c0 = np.full(3, C0)
    best = min(convex_objective(np.array(v, float), oracle, c0, 0.0) for v in itertools.product(*L.values))
    assert res.converged
    assert res.objective == pytest.approx(best, abs=1e-6)
    assert res.lower_bound <= res.objective + 1e-9
    assert np.all(np.diff(res.trace.lower_bounds) >= -1e-9)
    assert np.all(np.diff(res.trace.upper_bounds) <= 1e-12)
    res.trace.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "k,LB,UB,gap,oracle_seconds,solve_seconds" and len(lines) == len(res.trace) + 1


def test_benders_iteration_cap_returns_incumbent():
    ds = gaussian_instance(200, 3, 9)
    res = benders_solve(ds, "hinge", InterpretabilitySet.bounded(3, 5), C0=0.001, opts=BendersOptions(max_iters=2))
    assert not res.converged and res.stop_reason == "max-iters"
    assert len(res.trace) == 2 and res.gap >= 0

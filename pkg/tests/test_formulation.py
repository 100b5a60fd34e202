import itertools

import numpy as np
import pytest

from discreteclf import (
    InterpretabilitySet,
    OperationalConstraints,
    PenaltyConfig,
    PersonalizedLevels,
    adjust_penalty_for_missing,
    binarize,
    brute_force,
    build_mofn,
    build_pilm,
    build_program,
    build_slim,
    build_tilm,
    compute_big_m,
    dataset_from_arrays,
    default_l1_tiebreak,
    solve,
)
from discreteclf.formulation import FormulationError

from conftest import random_instance


def test_big_m_example():
    ds = dataset_from_arrays(np.array([[1.0, 1.0]]), [1])
    L = InterpretabilitySet([range(-10, 11)] * 3)
    assert compute_big_m(ds, L, 0.1).M[0] == pytest.approx(30.1)


def test_big_m_empty_range_is_margin():
    ds = dataset_from_arrays(np.zeros((1, 1)), [1])
    L = InterpretabilitySet([[0], range(-3, 4)])
    assert compute_big_m(ds, L, 0.5).M[0] == pytest.approx(0.5)


def test_big_m_bounds_every_score(rng):
    ds = random_instance(rng)
    L = InterpretabilitySet.bounded(ds.P, 2)
    M = compute_big_m(ds, L, 0.1).M
    allv = np.array(list(itertools.product(*L.values)))
    worst = (0.1 - ds.y[:, None] * (ds.X @ allv.T)).max(axis=1)
    assert np.allclose(M, worst)


def test_l1_tiebreak_formula():
    L = InterpretabilitySet.bounded(5, 10)
    assert default_l1_tiebreak(0.01, 100, L) == pytest.approx(1e-4)
    # C0 >= 1/N: the loss unit 1/N is the binding cap
    assert default_l1_tiebreak(0.5, 100, L) == pytest.approx(0.5 * 0.01 / 50)
    # prices summing to 0.0095 < 1/N leave 0.0005 of headroom below one error
    assert default_l1_tiebreak([0.0019] * 5, 100, L) == pytest.approx(0.5 * 0.0005 / 50)


def test_missing_adjustment():
    assert adjust_penalty_for_missing(0.01, 0, 100) == 0.01
    assert adjust_penalty_for_missing(0.01, 20, 100) == pytest.approx(0.21)
    assert adjust_penalty_for_missing(0.01, 100, 100) >= 1.0
    with pytest.raises(FormulationError):
        adjust_penalty_for_missing(0.01, 101, 100)


def test_two_point_example():
    # a single feature already separates the two points, so the optimum has size 1
    ds = dataset_from_arrays(np.array([[1.0, 1.0], [-1.0, -1.0]]), [1, -1])
    ip = build_slim(ds, InterpretabilitySet.bounded(2, 1), C0=0.01)
    r = solve(ip)
    b = brute_force(ip)
    eps = ip.l1_tiebreak_weight
    assert r.status == "optimal"
    assert r.objective == pytest.approx(0.01 + eps)
    assert b.objective == pytest.approx(0.01 + eps)
    # a score of exactly 0 predicts +1, so intercept -1 also works
    assert {tuple(a) for a in b.argmin} == {(0, 1, 0), (0, 0, 1), (-1, 1, 0), (-1, 0, 1)}
    assert tuple(r.coefficients) in {tuple(a) for a in b.argmin}


def test_zero_model_predicts_positive_everywhere(rng):
    # every score is 0, which predicts +1, so exactly the negatives are errors
    ds = random_instance(rng)
    ip = build_slim(ds, InterpretabilitySet.bounded(ds.P, 2), C0=0.05)
    zero = np.zeros(ds.P + 1)
    expected = ds.n_neg / ds.N
    assert ip.problem.objective(zero)[0] == pytest.approx(expected)
    x = ip.complete(zero)
    assert ip.is_feasible(x) and ip.objective_value(x) == pytest.approx(expected)
    assert solve(ip).objective <= 1.0


def test_ip_loss_is_exact_on_ties():
    # integer scores of exactly 0 are correct for positives and wrong for negatives
    ds = dataset_from_arrays(np.array([[1.0], [1.0], [2.0]]), [1, -1, 1])
    ip = build_slim(ds, InterpretabilitySet.bounded(1, 2), C0=0.01)
    lam = np.array([-1.0, 1.0])
    x = ip.complete(lam)
    assert ip.is_feasible(x)
    assert ip.objective_value(x) == pytest.approx(ip.problem.objective(lam)[0])
    assert ip.problem.loss(lam)[0] == pytest.approx(1 / 3)


def test_ip_objective_matches_problem_objective(rng):
    ds = random_instance(rng)
    L = InterpretabilitySet.bounded(ds.P, 2)
    ip = build_slim(ds, L, C0=0.03)
    for lam in itertools.islice(itertools.product(*L.values), 0, None, 7):
        lam = np.array(lam, float)
        x = ip.complete(lam)
        assert ip.is_feasible(x)
        assert ip.objective_value(x) == pytest.approx(ip.problem.objective(lam)[0])


def test_pilm_matches_brute_force(rng):
    levels = PersonalizedLevels(((0.0,), (-1.0, 1.0), (-2.0, 2.0)), (0.0, 0.02, 0.06))
    for _ in range(5):
        ds = random_instance(rng, n_hi=10, p_hi=3)
        ip = build_pilm(ds, levels, intercept_values=range(-3, 4))
        r = solve(ip)
        b = brute_force(ip)
        assert r.objective == pytest.approx(b.objective, abs=1e-9)


def test_pilm_only_zero_level():
    ds = dataset_from_arrays(np.array([[1.0], [2.0], [3.0]]), [1, -1, 1])
    ip = build_pilm(ds, PersonalizedLevels(((0.0,),), (0.0,)), intercept_values=[0])
    r = solve(ip)
    assert np.all(r.coefficients == 0)
    # all scores are 0 and predict +1; the single negative is the only error
    assert r.objective == pytest.approx(1 / 3)


def test_pilm_default_levels():
    lv = PersonalizedLevels.default()
    v, c = lv.values_and_costs()
    assert c[v == 0] == 0 and c[v == 7] == 0.01 and c[v == -50] == 0.05
    with pytest.raises(FormulationError):
        PersonalizedLevels(((0.0,), (1.0,)), (0.1, 0.1))


def test_mofn_single_perfect_rule():
    h = np.array([1, 0, 1, 0, 1, 1, 0, 0], float)
    noise = np.array([0, 1, 1, 0, 0, 1, 0, 1], float)
    y = np.where(h == 1, 1, -1)
    ds = dataset_from_arrays(np.column_stack([h, noise]), y)
    ip = build_mofn(ds, C0=0.01)
    r = solve(ip)
    assert r.status == "optimal"
    assert r.coefficients.tolist() == [-1.0, 1.0, 0.0]
    assert ip.problem.loss(r.coefficients)[0] == 0.0


def test_mofn_needs_binary_columns():
    ds = dataset_from_arrays(np.array([[0.5], [1.0]]), [1, -1])
    with pytest.raises(FormulationError):
        build_mofn(ds, 0.01)


def test_tilm_matches_brute_force_and_sign_agreement(rng):
    for seed in range(3):
        r_ = np.random.default_rng(seed)
        x = r_.integers(0, 5, size=20).astype(float)
        y = np.where(x + r_.normal(0, 1, 20) >= 2, 1, -1)
        raw = dataset_from_arrays(x[:, None], y, kinds=["real"])
        rules, rs = binarize(raw, "domain", [1.5, 2.5, 3.5])
        L = InterpretabilitySet([range(-3, 4)] + [range(-2, 3)] * rules.P)
        ip = build_tilm(rules, L, feature_cost=0.02, rule_cost=0.01, max_rules=2)
        r = solve(ip)
        b = brute_force(ip)
        assert r.objective == pytest.approx(b.objective, abs=1e-9)
        nz = r.coefficients[1:][r.coefficients[1:] != 0]
        assert nz.size <= 2
        assert np.all(nz > 0) or np.all(nz < 0)


def test_build_program_dispatch(rng):
    ds = random_instance(rng)
    ip = build_program(ds, PenaltyConfig("slim", C0=0.02), InterpretabilitySet.bounded(ds.P, 2))
    assert ip.problem is not None
    with pytest.raises(FormulationError):
        build_program(ds, PenaltyConfig("slim"), None)
    assert "lambda_0" in ip.to_lp()


# --- operational constraints -------------------------------------------------


def _best_feasible(ip, pred):
    L = ip.problem.L
    allv = np.array(list(itertools.product(*L.values)), float)
    f = ip.problem.objective(allv)
    ok = np.array([pred(v) for v in allv])
    return f[ok].min()


def test_either_or(rng):
    X = rng.integers(0, 2, size=(24, 2)).astype(float)
    y = np.where(X[:, 0] + X[:, 1] >= 1, 1, -1)
    ds = dataset_from_arrays(X, y)
    ops = OperationalConstraints(either_or=((1, 2),))
    ip = build_slim(ds, InterpretabilitySet.bounded(2, 2), C0=0.001, ops=ops)
    r = solve(ip)
    assert not (r.coefficients[1] != 0 and r.coefficients[2] != 0)
    assert r.objective == pytest.approx(brute_force(ip).objective)


def test_max_model_size_zero(rng):
    ds = random_instance(rng)
    ip = build_slim(ds, InterpretabilitySet.bounded(ds.P, 2), C0=1e-3, ops=OperationalConstraints(max_model_size=0))
    r = solve(ip)
    assert np.all(r.coefficients[1:] == 0)


def test_if_then_and_hierarchy(rng):
    ds = random_instance(rng, p_hi=3, n_lo=15)
    if ds.P < 3:
        ds = dataset_from_arrays(np.column_stack([ds.X[:, 1:], ds.X[:, 1:] * 0 + 1, ds.X[:, 1:] * 0][:3]).reshape(ds.N, -1)[:, :3], ds.y)
    ops = OperationalConstraints(if_then=(((1,), 2),), hierarchy=((3, 1),))
    ip = build_slim(ds, InterpretabilitySet.bounded(3, 2), C0=1e-3, ops=ops)
    r = solve(ip)
    lam = r.coefficients
    assert lam[1] == 0 or lam[2] != 0
    assert lam[3] == 0 or lam[1] != 0
    assert r.objective == pytest.approx(brute_force(ip).objective)


def test_max_fpr_matches_filtered_enumeration(rng):
    for _ in range(5):
        ds = random_instance(rng, n_lo=12, n_hi=24, p_hi=2)
        ops = OperationalConstraints(max_fpr=0.2)
        ip = build_slim(ds, InterpretabilitySet.bounded(ds.P, 2), C0=0.01, ops=ops)
        neg = ds.y == -1

        def fpr_ok(v):
            return np.sum((ds.X[neg] @ v) >= 0) <= np.floor(0.2 * neg.sum() + 1e-9)

        r = solve(ip)
        assert r.objective == pytest.approx(_best_feasible(ip, fpr_ok), abs=1e-9)
        assert fpr_ok(r.coefficients)


def test_signs_respected(rng):
    ds = random_instance(rng, p_hi=3)
    ops = OperationalConstraints(signs={1: "nonpos"})
    ip = build_slim(ds, InterpretabilitySet.bounded(ds.P, 2), C0=1e-3, ops=ops)
    assert solve(ip).coefficients[1] <= 0

import math

import numpy as np
import pytest

from discreteclf import (
    InterpretabilitySet,
    IntegerProgram,
    SolveOptions,
    brute_force,
    build_slim,
    dataset_from_arrays,
    solve,
)
from discreteclf.heuristics import local_search, round_to_sets
from discreteclf.solver import EnumerationCapExceeded, relative_gap

from conftest import random_instance


def _knapsack() -> IntegerProgram:
    ip = IntegerProgram("knapsack")
    v = [ip.add_var(f"x{i}", "B", 0, 1, obj=-c) for i, c in enumerate([10, 13, 7, 8])]
    ip.add_row("cap", v, [5, 7, 4, 3], hi=10)
    return ip


def test_generic_knapsack():
    r = solve(_knapsack())
    # best subset with weight <= 10: items 0, 2 (w 9, v 17) vs 1, 3 (w 10, v 21)
    assert r.status == "optimal"
    assert r.objective == pytest.approx(-21)
    assert r.x[[1, 3]].tolist() == [1.0, 1.0]


def test_general_integer_branching():
    ip = IntegerProgram("int")
    x = ip.add_var("x", "I", 0, 10, obj=-1)
    y = ip.add_var("y", "I", 0, 10, obj=-1)
    ip.add_row("a", [x, y], [2, 2], hi=7)
    r = solve(ip)
    assert r.objective == pytest.approx(-3)


def test_contradictory_bounds_infeasible():
    ip = IntegerProgram("bad")
    a = ip.add_var("alpha", "B", 0, 1)
    ip.add_row("le", [a], [1], hi=0)
    ip.add_row("ge", [a], [1], lo=1)
    assert solve(ip).status == "infeasible"


def test_node_limit_reports_incumbent_and_gap(rng):
    ds = random_instance(rng, n_lo=25, n_hi=30, p_hi=4)
    ip = build_slim(ds, InterpretabilitySet.bounded(ds.P, 5), C0=0.01)
    r = solve(ip, SolveOptions(node_limit=1))
    assert r.status in ("optimal", "feasible-time-limit")
    assert r.has_solution and r.dual_bound <= r.objective + 1e-9
    assert 0 <= r.gap <= 1


def test_result_invariants(rng):
    for _ in range(5):
        ds = random_instance(rng)
        ip = build_slim(ds, InterpretabilitySet.bounded(ds.P, 2), C0=0.02)
        r = solve(ip)
        assert r.objective <= 1.0 + 1e-12
        assert r.dual_bound <= r.objective + 1e-9
        assert ip.is_feasible(r.x)
        inc = [t[2] for t in r.trace]
        bnd = [t[3] for t in r.trace if math.isfinite(t[3])]
        assert all(b <= a + 1e-12 for a, b in zip(inc, inc[1:]))
        assert all(b >= a - 1e-12 for a, b in zip(bnd, bnd[1:]))
        pool = [p.objective for p in r.pool]
        assert pool == sorted(pool) and pool[0] == pytest.approx(r.objective)


def test_deterministic(rng):
    ds = random_instance(rng, n_lo=20)
    ip = build_slim(ds, InterpretabilitySet.bounded(ds.P, 3), C0=0.01)
    a, b = solve(ip), solve(ip)
    assert np.array_equal(a.coefficients, b.coefficients) and a.node_count == b.node_count


def test_brute_force_zero_set():
    ds = dataset_from_arrays(np.array([[1.0], [2.0]]), [1, -1])
    r = brute_force(build_slim(ds, InterpretabilitySet([[0], [0, 1]]), C0=0.9).problem)
    assert r.coefficients.tolist() == [0.0, 0.0]
    assert r.objective == pytest.approx(0.5)


def test_brute_force_cap():
    ds = dataset_from_arrays(np.zeros((3, 4)), [1, -1, 1])
    ip = build_slim(ds, InterpretabilitySet.bounded(4, 10), C0=0.01)
    with pytest.raises(EnumerationCapExceeded):
        brute_force(ip, cap=1000)


def test_relative_gap():
    assert relative_gap(1.0, 1.0) == 0.0
    assert relative_gap(2.0, 1.0) == pytest.approx(0.5)


def test_local_search_improves_and_stays_in_set(rng):
    for _ in range(5):
        ds = random_instance(rng, noisy_rule=True)
        ip = build_slim(ds, InterpretabilitySet.bounded(ds.P, 3), C0=0.01)
        pr = ip.problem
        start = round_to_sets(pr, np.zeros(pr.n_coef))
        lam, f = local_search(pr, start)
        assert pr.L.contains(lam)
        assert f <= pr.objective(start)[0] + 1e-12
        assert f == pytest.approx(pr.objective(lam)[0])
        assert f >= brute_force(pr).objective - 1e-12

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from discreteclf.bounds import (
    BoundError,
    coprime_count,
    coprime_count_enumerated,
    density_table,
    kth_margin_lambda,
    l0_hypothesis_count,
    l0_hypothesis_count_enumerated,
    margin_profile,
    min_margin_lambda,
    occam_gap,
    round_to_grid,
    write_density_csv,
    zero_one_loss,
)


def test_min_margin_example():
    # gamma_min = 1/sqrt(2), X_max = 1, P = 2 -> ratio exactly 1 -> Lambda 2
    r = min_margin_lambda([1.0, 1.0], np.eye(2))
    assert r.ratio == pytest.approx(1.0)
    assert r.Lambda == 2 and r.max_extra_errors == 0


def test_zero_margin_flag():
    r = min_margin_lambda([1.0, -1.0], np.array([[1.0, 1.0], [2.0, 0.0]]))
    assert r.zero_margin and r.Lambda is None


def test_kth_margin_outlier():
    # margins {0.01, 1, 1}: ratios 1 / (2 * 0.01) = 50 and 1 / (2 * 1) = 0.5
    X = np.array([[0.01], [1.0], [1.0]])
    y = np.array([1, 1, 1])
    r1 = min_margin_lambda([1.0], X)
    r2 = kth_margin_lambda([1.0], X, 2)
    assert r1.Lambda == 51 and r2.Lambda == 1
    assert kth_margin_lambda([1.0], X, 1) == r1
    lam = round_to_grid([1.0], r2.Lambda)
    assert zero_one_loss(lam, X, y) - zero_one_loss([1.0], X, y) <= 1
    # in two dimensions the sqrt(P) factor enters: 1 * sqrt(2) / 0.02 = 70.7
    X2 = np.column_stack([X[:, 0], np.zeros(3)])
    assert min_margin_lambda([1.0, 0.0], X2).Lambda == 71


def test_kth_margin_degenerate_and_range():
    X = np.eye(3)
    assert kth_margin_lambda([1.0, 1.0, 1.0], X, 3).degenerate
    with pytest.raises(BoundError):
        kth_margin_lambda([1.0, 1.0, 1.0], X, 0)


def test_profile_sorted():
    p = margin_profile([1.0, 2.0], np.array([[3.0, 0.0], [0.0, 1.0], [1.0, 1.0]]))
    assert np.all(np.diff(p.margins) >= 0)
    assert p.gamma_min == pytest.approx(2 / math.sqrt(5))


def test_round_to_grid():
    assert round_to_grid([3.0, 4.0], 10).tolist() == [6, 8]
    assert round_to_grid([0.0, 5.0], 5).tolist() == [0, 5]
    # halves go away from zero
    assert round_to_grid([1.0, -1.0, 1.0, -1.0], 1).tolist() == [1, -1, 1, -1]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 5))
def test_rounding_at_min_margin_keeps_loss(seed, P):
    rng = np.random.default_rng(seed)
    rho = rng.normal(size=P)
    X = rng.normal(size=(30, P))
    s = X @ rho
    keep = np.abs(s) > 1e-3
    X, y = X[keep], np.sign(s[keep])
    r = min_margin_lambda(rho, X)
    lam = round_to_grid(rho, r.Lambda)
    assert zero_one_loss(lam, X, y) <= zero_one_loss(rho, X, y)


def test_occam_gap():
    assert occam_gap(1024, 1000, 0.01) == pytest.approx(0.0759, abs=1e-4)
    assert occam_gap(1, 10, 1.0) == 0.0
    # huge integer counts stay finite
    assert math.isfinite(occam_gap(21**400, 10**6, 0.05))


def test_l0_count_examples():
    assert l0_hypothesis_count(2, 1, 0.6) == 5
    assert l0_hypothesis_count(3, 2, 1.5) == 1
    assert l0_hypothesis_count(3, 2, 0.3) == 5**3


@pytest.mark.parametrize("P,Lam", list(itertools.product(range(1, 5), range(1, 4))))
def test_l0_count_matches_enumeration(P, Lam):
    for C0 in (0.2, 0.34, 0.5, 0.9):
        assert l0_hypothesis_count(P, Lam, C0) == l0_hypothesis_count_enumerated(P, Lam, C0)


def test_coprime_examples():
    assert coprime_count(1, 1) == (2, pytest.approx(2 / 3))
    c, d = coprime_count(2, 1)
    assert c == 8 and d == pytest.approx(8 / 9)


def test_coprime_against_gcd_brute_force():
    for P in (1, 2):
        for Lam in range(1, 7):
            n = sum(
                1
                for v in itertools.product(range(-Lam, Lam + 1), repeat=P)
                if any(v) and math.gcd(*[abs(t) for t in v]) == 1
            )
            assert coprime_count(P, Lam)[0] == n == coprime_count_enumerated(P, Lam)[0]


def test_density_table(tmp_path):
    rows = density_table([1, 2], [1, 3], 100, 0.05)
    assert [(r["P"], r["Lambda"]) for r in rows] == [(1, 1), (1, 3), (2, 1), (2, 3)]
    assert all(0 < r["density"] <= 1 for r in rows)
    write_density_csv(tmp_path / "d.csv", rows)
    assert (tmp_path / "d.csv").read_text().splitlines()[0].startswith("P,Lambda")

"""Primal heuristics over coefficient space.

These routines never prove anything; they only propose good feasible
coefficient vectors which the branch-and-bound solver validates against the
integer program before accepting them.
"""

from __future__ import annotations

import itertools
import time
from typing import Callable

import numpy as np

from .problem import DiscreteProblem

__all__ = ["round_to_sets", "local_search", "coordinate_descent"]

_IMPROVE = 1e-12


def round_to_sets(problem: DiscreteProblem, lam: np.ndarray) -> np.ndarray:
    """Snap each coordinate to the nearest admissible value."""
    return np.array([problem.L.nearest(j, float(v)) for j, v in enumerate(lam)])


def _full_objective(problem: DiscreteProblem, Lam: np.ndarray, margin: float | None) -> np.ndarray:
    f = problem.objective(Lam, margin)
    ok = problem.feasible(Lam, margin)
    return np.where(ok, f, np.inf)


def _evaluate_with_intercept(
    problem: DiscreteProblem, Lam: np.ndarray, S_wo: np.ndarray, margin: float | None
) -> tuple[np.ndarray, np.ndarray]:
    """Objective of candidate rows after choosing each row's best intercept.

    ``Lam[:, 0]`` is overwritten with the chosen intercepts.
    """
    b, f0 = problem.best_intercepts(S_wo, margin)
    Lam[:, 0] = b
    rest = problem.coordinate_costs(Lam)[:, 1:].sum(axis=1) + problem.group_costs(Lam)
    ok = problem.structure_feasible(Lam)
    return Lam, np.where(ok, f0 + rest, np.inf)


def local_search(
    problem: DiscreteProblem,
    lam0: np.ndarray,
    margin: float | None = None,
    max_passes: int = 50,
    time_limit: float | None = None,
    pair_moves: bool = True,
) -> tuple[np.ndarray, float]:
    """Descend from ``lam0`` using moves that re-optimize the intercept exactly.

    Neighbourhoods, tried in order until none improves:

    1. change one feature coefficient to any admissible value;
    2. swap a used feature for an unused one (any value);
    3. change two used coefficients jointly.

    Every candidate gets its loss-minimizing intercept, found by sorting the
    examples' break-even intercepts.

    Parameters
    ----------
    problem : DiscreteProblem
        Problem to improve on.
    lam0 : numpy.ndarray
        Starting point; must lie in the value sets.
    margin : float, optional
        Loss semantics (defaults to the problem's encoding margin).

    Returns
    -------
    (lam, objective)
        Best vector found and its objective (``inf`` if nothing feasible).
    """
    t0 = time.perf_counter()
    X = problem.X
    P = problem.n_coef - 1
    cur = np.asarray(lam0, dtype=float).copy()
    cur_f = float(_full_objective(problem, cur[None, :], margin)[0])

    # intercept only
    S_wo = (X[:, 1:] @ cur[1:])[None, :]
    cand, f = _evaluate_with_intercept(problem, cur[None, :].copy(), S_wo, margin)
    if f[0] < cur_f - _IMPROVE:
        cur, cur_f = cand[0].copy(), float(f[0])

    def out_of_time() -> bool:
        return time_limit is not None and time.perf_counter() - t0 > time_limit

    for _ in range(max_passes):
        improved = False
        base = X[:, 1:] @ cur[1:]
        for j in range(1, P + 1):
            vals = problem.L.values[j]
            if vals.size <= 1:
                continue
            Lam = np.repeat(cur[None, :], vals.size, axis=0)
            Lam[:, j] = vals
            S_wo = base[None, :] + np.outer(vals - cur[j], X[:, j])
            Lam, f = _evaluate_with_intercept(problem, Lam, S_wo, margin)
            k = int(np.argmin(f))
            if f[k] < cur_f - _IMPROVE:
                cur, cur_f = Lam[k].copy(), float(f[k])
                base = X[:, 1:] @ cur[1:]
                improved = True
        if improved:
            if out_of_time():
                break
            continue
        if not pair_moves or out_of_time():
            break
        used = [j for j in range(1, P + 1) if cur[j] != 0]
        unused = [j for j in range(1, P + 1) if cur[j] == 0 and problem.L.values[j].size > 1]
        best = (cur_f, None)
        for j, k in itertools.product(used, unused):
            vals = problem.L.values[k]
            vals = vals[vals != 0]
            Lam = np.repeat(cur[None, :], vals.size, axis=0)
            Lam[:, j] = 0.0
            Lam[:, k] = vals
            S_wo = (base - cur[j] * X[:, j])[None, :] + np.outer(vals, X[:, k])
            Lam, f = _evaluate_with_intercept(problem, Lam, S_wo, margin)
            r = int(np.argmin(f))
            if f[r] < best[0] - _IMPROVE:
                best = (float(f[r]), Lam[r].copy())
        for j, k in itertools.combinations(used, 2):
            if out_of_time():
                break
            vj, vk = problem.L.values[j], problem.L.values[k]
            gj, gk = np.meshgrid(vj, vk, indexing="ij")
            gj, gk = gj.ravel(), gk.ravel()
            Lam = np.repeat(cur[None, :], gj.size, axis=0)
            Lam[:, j] = gj
            Lam[:, k] = gk
            S_wo = base[None, :] + np.outer(gj - cur[j], X[:, j]) + np.outer(gk - cur[k], X[:, k])
            Lam, f = _evaluate_with_intercept(problem, Lam, S_wo, margin)
            r = int(np.argmin(f))
            if f[r] < best[0] - _IMPROVE:
                best = (float(f[r]), Lam[r].copy())
        if best[1] is None:
            break
        cur_f, cur = best[0], best[1]
    return cur, cur_f


def coordinate_descent(
    values: tuple[np.ndarray, ...],
    evaluate: Callable[[np.ndarray], np.ndarray],
    lam0: np.ndarray,
    max_passes: int = 50,
) -> tuple[np.ndarray, float]:
    """Generic single-coordinate descent for an arbitrary vectorized objective.

    Parameters
    ----------
    values : tuple of numpy.ndarray
        Admissible values per coordinate.
    evaluate : callable
        Maps a ``(K, n)`` matrix of candidates to ``K`` objective values
        (``inf`` for infeasible candidates).
    lam0 : numpy.ndarray
        Starting point.
    """
    cur = np.asarray(lam0, dtype=float).copy()
    cur_f = float(evaluate(cur[None, :])[0])
    for _ in range(max_passes):
        improved = False
        for j, vals in enumerate(values):
            if vals.size <= 1:
                continue
            Lam = np.repeat(cur[None, :], vals.size, axis=0)
            Lam[:, j] = vals
            f = evaluate(Lam)
            k = int(np.argmin(f))
            if f[k] < cur_f - _IMPROVE:
                cur, cur_f = Lam[k].copy(), float(f[k])
                improved = True
        if not improved:
            break
    return cur, cur_f

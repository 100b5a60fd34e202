"""Cutting-plane training with convex losses.

The aggregate loss is never written into the integer program.  Instead an
oracle returns its value and a subgradient at the current coefficients, and
each answer becomes a linear underestimator ``theta >= L_k + g_k (lambda - lambda_k)``
in a small proxy program over the coefficients alone.  The proxy optimum is a
lower bound on the true optimum; the best evaluated point is an upper bound.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from .coefsets import InterpretabilitySet
from .data import ClassWeights, Dataset
from .formulation import IntegerProgram, _add_coefficients, _add_l0_l1, _resolve_C0, example_weights
from .solver import SolveOptions, solve

__all__ = [
    "LOSS_KINDS",
    "LossOracle",
    "oracle_eval",
    "Cut",
    "CutPool",
    "BendersIteration",
    "BendersTrace",
    "BendersOptions",
    "BendersResult",
    "benders_solve",
    "convex_objective",
]

LOSS_KINDS = ("hinge", "quadratic", "logistic", "exponential")

_CHUNK = 1 << 16


def _per_example(kind: str, m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Loss values and derivatives with respect to the margin ``m = y lambda.x``."""
    if kind == "hinge":
        return np.maximum(0.0, 1.0 - m), -(m < 1.0).astype(float)
    if kind == "quadratic":
        r = 1.0 - m
        return r * r, -2.0 * r
    if kind == "logistic":
        return np.logaddexp(0.0, -m), -expit(-m)
    if kind == "exponential":
        # exp overflows beyond ~709; clip keeps the value finite and the cut valid-but-loose
        e = np.exp(np.minimum(1.0 - m, 700.0))
        return e, -e
    raise ValueError(f"unknown loss kind {kind!r}; choose from {LOSS_KINDS}")


def oracle_eval(
    kind: str,
    lam: Sequence[float],
    dataset: Dataset,
    weights: ClassWeights | None = None,
) -> tuple[float, np.ndarray]:
    """Value and subgradient of a weighted aggregate convex loss.

    The value is ``sum_i w_i loss(y_i lambda . x_i)`` where ``w_i`` are the
    per-example weights of the 0-1 programs (``1/N`` each when unweighted).
    Examples are reduced in fixed-size chunks in index order, so results are
    bitwise reproducible.

    Parameters
    ----------
    kind : str
        One of ``LOSS_KINDS``.
    lam : sequence of float
        Coefficients including the intercept.
    dataset : Dataset
        Training data.
    weights : ClassWeights, optional
        Class weights.

    Returns
    -------
    (value, subgradient)
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (dataset.X.shape[1],):
        raise ValueError(f"expected {dataset.X.shape[1]} coefficients, got {lam.shape}")
    if not np.all(np.isfinite(lam)):
        raise ValueError("coefficients must be finite")
    w = example_weights(dataset, weights)
    value = 0.0
    grad = np.zeros_like(lam)
    for s in range(0, dataset.N, _CHUNK):
        X = dataset.X[s : s + _CHUNK]
        y = dataset.y[s : s + _CHUNK]
        ws = w[s : s + _CHUNK]
        m = y * (X @ lam)
        v, d = _per_example(kind, m)
        value += float(ws @ v)
        grad += X.T @ (ws * d * y)
    return value, grad


@dataclass(frozen=True)
class LossOracle:
    """A convex loss bound to a dataset; calling it returns value and subgradient."""

    kind: str
    dataset: Dataset
    weights: ClassWeights | None = None

    def __post_init__(self) -> None:
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}; choose from {LOSS_KINDS}")

    def __call__(self, lam: Sequence[float]) -> tuple[float, np.ndarray]:
        return oracle_eval(self.kind, lam, self.dataset, self.weights)


@dataclass(frozen=True)
class Cut:
    """Supporting plane ``theta >= value + grad . (lambda - anchor)``."""

    anchor: np.ndarray
    value: float
    grad: np.ndarray

    def __call__(self, lam: np.ndarray) -> float:
        return float(self.value + self.grad @ (np.asarray(lam, dtype=float) - self.anchor))


@dataclass
class CutPool:
    """Accumulated cuts; their pointwise maximum underestimates the loss."""

    cuts: list[Cut] = field(default_factory=list)

    def add(self, anchor: np.ndarray, value: float, grad: np.ndarray) -> None:
        self.cuts.append(Cut(np.asarray(anchor, dtype=float).copy(), float(value), np.asarray(grad, dtype=float).copy()))

    def __len__(self) -> int:
        return len(self.cuts)

    def model(self, lam: Sequence[float]) -> float:
        """Piecewise-linear lower model (0 when empty, as losses are non-negative)."""
        return max([0.0] + [c(np.asarray(lam, dtype=float)) for c in self.cuts])


@dataclass(frozen=True)
class BendersIteration:
    k: int
    coefficients: np.ndarray
    lower_bound: float
    upper_bound: float
    objective: float
    oracle_seconds: float
    solve_seconds: float


@dataclass
class BendersTrace:
    """Per-iteration record; ``upper_bound`` is the best objective seen so far."""

    iterations: list[BendersIteration] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.iterations)

    @property
    def lower_bounds(self) -> np.ndarray:
        return np.array([it.lower_bound for it in self.iterations])

    @property
    def upper_bounds(self) -> np.ndarray:
        return np.array([it.upper_bound for it in self.iterations])

    def to_csv(self, path: str | Path) -> None:
        """One row per iteration: ``k, LB, UB, gap, oracle_seconds, solve_seconds``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "LB", "UB", "gap", "oracle_seconds", "solve_seconds"])
            for it in self.iterations:
                w.writerow(
                    [
                        it.k,
                        repr(it.lower_bound),
                        repr(it.upper_bound),
                        repr(it.upper_bound - it.lower_bound),
                        f"{it.oracle_seconds:.6f}",
                        f"{it.solve_seconds:.6f}",
                    ]
                )


@dataclass(frozen=True)
class BendersOptions:
    """Stopping rules and per-proxy solve options.

    Attributes
    ----------
    gap_tol : float
        Stop when ``UB - LB <= gap_tol``.
    max_iters : int
        Iteration cap.
    time_limit : float
        Overall wall-clock budget in seconds.
    proxy_time_limit : float
        Time limit of each proxy solve.
    """

    gap_tol: float = 1e-6
    max_iters: int = 500
    time_limit: float = 600.0
    proxy_time_limit: float = 60.0


@dataclass
class BendersResult:
    coefficients: np.ndarray
    objective: float
    lower_bound: float
    trace: BendersTrace
    converged: bool
    stop_reason: str
    cuts: CutPool

    @property
    def gap(self) -> float:
        return self.objective - self.lower_bound


def convex_objective(
    lam: Sequence[float],
    oracle: LossOracle,
    C0: np.ndarray,
    eps: float,
) -> float:
    """Loss plus ``sum_j C0_j 1[lambda_j != 0] + eps |lambda_j|`` over features."""
    lam = np.asarray(lam, dtype=float)
    v, _ = oracle(lam)
    return v + float(C0[1:] @ (lam[1:] != 0)) + eps * float(np.abs(lam[1:]).sum())


def _proxy(L: InterpretabilitySet, names: Sequence[str], C0: np.ndarray, eps: float, pool: CutPool) -> tuple[IntegerProgram, int]:
    ip = IntegerProgram("benders-proxy")
    coef = _add_coefficients(ip, L, names)
    _add_l0_l1(ip, L, C0, eps, range(1, L.n_coef))
    theta = ip.add_var("theta", "C", 0.0, math.inf, obj=1.0, role="theta")
    for r, cut in enumerate(pool.cuts):
        # theta - g.lambda >= L_k - g.lambda_k
        ip.add_row(f"cut_{r}", np.concatenate(([theta], coef)), np.concatenate(([1.0], -cut.grad)), lo=cut.value - float(cut.grad @ cut.anchor))
    return ip, theta


def benders_solve(
    dataset: Dataset,
    kind: str,
    L: InterpretabilitySet,
    C0: float = 0.0,
    weights: ClassWeights | None = None,
    C0_per_feature: dict[int, float] | None = None,
    l1_tiebreak_weight: float = 0.0,
    opts: BendersOptions | None = None,
) -> BendersResult:
    """Minimize ``loss(lambda) + C0 ||lambda||_0 + eps ||lambda||_1`` over ``L``.

    Parameters
    ----------
    dataset : Dataset
        Training data (intercept in column 0).
    kind : str
        Convex loss, one of ``LOSS_KINDS``.
    L : InterpretabilitySet
        Admissible coefficients.
    C0 : float
        Price per non-zero feature coefficient.
    weights : ClassWeights, optional
        Class weights passed to the oracle.
    C0_per_feature : dict, optional
        Per-coefficient overrides of ``C0``.
    l1_tiebreak_weight : float
        Small L1 price ``eps``.
    opts : BendersOptions, optional
        Stopping rules.

    Returns
    -------
    BendersResult
        ``converged`` is False when the iteration cap or time budget ended the
        loop; the best evaluated coefficients are still returned.
    """
    opts = opts or BendersOptions()
    if L.n_coef != dataset.X.shape[1]:
        raise ValueError("value sets and data disagree on the number of coefficients")
    oracle = LossOracle(kind, dataset, weights)
    c0 = _resolve_C0(C0, C0_per_feature, L.n_coef)
    eps = float(l1_tiebreak_weight)
    names = dataset.names_with_intercept
    pool = CutPool()
    trace = BendersTrace()
    t_start = time.perf_counter()
    best_lam: np.ndarray | None = None
    ub = math.inf
    lb = 0.0
    prev: np.ndarray | None = None
    reason = "max-iters"
    for k in range(1, opts.max_iters + 1):
        t0 = time.perf_counter()
        ip, _ = _proxy(L, names, c0, eps, pool)
        remaining = opts.time_limit - (t0 - t_start)
        res = solve(ip, SolveOptions(time_limit=max(1e-3, min(opts.proxy_time_limit, remaining)), absolute_gap=1e-12))
        t_solve = time.perf_counter() - t0
        if not res.has_solution:
            reason = f"proxy-{res.status}"
            break
        assert res.x is not None and ip.coef_vars is not None
        lam = np.array([L.nearest(j, v) for j, v in enumerate(res.x[ip.coef_vars])])
        lb = max(lb, float(res.dual_bound))
        t1 = time.perf_counter()
        value, grad = oracle(lam)
        t_oracle = time.perf_counter() - t1
        z = value + float(c0[1:] @ (lam[1:] != 0)) + eps * float(np.abs(lam[1:]).sum())
        if z < ub:
            ub, best_lam = z, lam.copy()
        lb = min(lb, ub)
        pool.add(lam, value, grad)
        trace.iterations.append(BendersIteration(k, lam, lb, ub, z, t_oracle, t_solve))
        if ub - lb <= opts.gap_tol:
            reason = "gap"
            break
        if prev is not None and np.array_equal(prev, lam):
            reason = "repeat"
            break
        prev = lam
        if time.perf_counter() - t_start > opts.time_limit:
            reason = "time-limit"
            break
    if best_lam is None:
        best_lam = np.array([L.nearest(j, 0.0) for j in range(L.n_coef)])
        ub = convex_objective(best_lam, oracle, c0, eps)
    return BendersResult(best_lam, ub, lb, trace, reason in ("gap", "repeat"), reason, pool)

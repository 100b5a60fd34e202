"""Discretization and generalization bounds for bounded integer coefficients.

All functions here work on the non-intercept coefficients only: ``rho`` has
one entry per feature and the feature matrix carries no intercept column.
Passing a :class:`~discreteclf.data.Dataset` strips its intercept column.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .data import Dataset

__all__ = [
    "MarginProfile",
    "ResolutionBound",
    "BoundError",
    "margin_profile",
    "min_margin_lambda",
    "kth_margin_lambda",
    "round_to_grid",
    "zero_one_loss",
    "occam_gap",
    "l0_hypothesis_count",
    "l0_hypothesis_count_enumerated",
    "coprime_count",
    "coprime_count_enumerated",
    "density_table",
    "write_density_csv",
]

_REL_TOL = 1e-9
ENUMERATION_BUDGET = 41**6


class BoundError(ValueError):
    """Raised for invalid inputs to a bound computation."""


def _features(data: Dataset | np.ndarray) -> np.ndarray:
    if isinstance(data, Dataset):
        return np.asarray(data.X[:, 1:], dtype=float)
    X = np.asarray(data, dtype=float)
    if X.ndim != 2:
        raise BoundError("feature matrix must be two-dimensional")
    return X


@dataclass(frozen=True)
class MarginProfile:
    """Normalized margins of a real-valued reference classifier.

    Attributes
    ----------
    rho : numpy.ndarray
        Reference coefficients (no intercept).
    order : numpy.ndarray
        Example indices sorted by increasing margin (stable).
    margins : numpy.ndarray
        Sorted normalized margins ``|rho . x| / ||rho||_2``.
    norms : numpy.ndarray
        Euclidean norms of the examples, in the same sorted order.
    """

    rho: np.ndarray
    order: np.ndarray
    margins: np.ndarray
    norms: np.ndarray

    @property
    def N(self) -> int:
        return int(self.margins.size)

    @property
    def P(self) -> int:
        return int(self.rho.size)

    @property
    def gamma_min(self) -> float:
        return float(self.margins[0])

    @property
    def x_max(self) -> float:
        return float(self.norms.max())

    def gamma(self, k: int) -> float:
        """The ``k``-th smallest margin (1-based)."""
        return float(self.margins[k - 1])

    def x_norm(self, k: int) -> float:
        """Largest norm among the examples kept when the ``k - 1`` smallest margins are dropped."""
        return float(self.norms[k - 1 :].max())


def margin_profile(rho: Sequence[float], data: Dataset | np.ndarray) -> MarginProfile:
    """Sort the examples of ``data`` by their normalized margin under ``rho``."""
    rho = np.asarray(rho, dtype=float)
    X = _features(data)
    if X.shape[1] != rho.size:
        raise BoundError(f"rho has {rho.size} entries but the data has {X.shape[1]} features")
    if X.shape[0] == 0:
        raise BoundError("no examples")
    norm = float(np.linalg.norm(rho))
    if norm == 0.0:
        raise BoundError("rho must be nonzero")
    m = np.abs(X @ rho) / norm
    order = np.argsort(m, kind="stable")
    return MarginProfile(rho=rho, order=order, margins=m[order], norms=np.linalg.norm(X, axis=1)[order])


@dataclass(frozen=True)
class ResolutionBound:
    """Outcome of a resolution-bound computation.

    Attributes
    ----------
    Lambda : int or None
        Smallest admissible integer bound, or ``None`` when a flag is set.
    k : int
        Margin rank used (1 for the minimum-margin bound).
    ratio : float
        The value ``X sqrt(P) / (2 gamma)`` that ``Lambda`` must exceed.
    max_extra_errors : int
        Guaranteed bound on the 0-1 loss increase after rounding, ``k - 1``.
    zero_margin : bool
        Set when the relevant margin is zero; the guarantee then holds for
        any grid because the reference already errs on those examples.
    degenerate : bool
        Set when ``k`` equals the number of examples.
    """

    Lambda: int | None
    k: int
    ratio: float
    max_extra_errors: int
    zero_margin: bool = False
    degenerate: bool = False


def _smallest_integer_above(value: float) -> int:
    near = round(value)
    if abs(value - near) <= _REL_TOL * max(1.0, abs(value)):
        return int(near) + 1
    return int(math.floor(value)) + 1


def _bound_at(profile: MarginProfile, k: int) -> ResolutionBound:
    gamma = profile.gamma(k)
    if gamma <= _REL_TOL * max(1.0, profile.x_max):
        return ResolutionBound(None, k, math.inf, k - 1, zero_margin=True)
    ratio = profile.x_norm(k) * math.sqrt(profile.P) / (2.0 * gamma)
    return ResolutionBound(max(1, _smallest_integer_above(ratio)), k, ratio, k - 1)


def min_margin_lambda(rho: Sequence[float], data: Dataset | np.ndarray) -> ResolutionBound:
    """Grid resolution that preserves the 0-1 loss of ``rho`` after rounding.

    Returns the smallest integer strictly greater than
    ``X_max sqrt(P) / (2 gamma_min)``.

    Parameters
    ----------
    rho : sequence of float
        Reference coefficients, one per feature.
    data : Dataset or numpy.ndarray
        Training examples.

    Returns
    -------
    ResolutionBound
        ``Lambda`` is ``None`` and ``zero_margin`` is set when some example
        lies on the reference hyperplane.

    Examples
    --------
    >>> import numpy as np
    >>> min_margin_lambda([1.0, 1.0], np.eye(2)).Lambda
    2
    """
    return _bound_at(margin_profile(rho, data), 1)


def kth_margin_lambda(rho: Sequence[float], data: Dataset | np.ndarray, k: int) -> ResolutionBound:
    """Resolution bound that tolerates up to ``k - 1`` extra training errors.

    The ``k - 1`` examples with the smallest margins are set aside; the bound
    is the minimum-margin bound on the rest, whose smallest margin is
    ``gamma_(k)`` and whose largest norm is ``X_(k)``.  With ``k = 1`` this is
    exactly :func:`min_margin_lambda`.

    Parameters
    ----------
    k : int
        Margin rank, ``1 <= k <= N``.

    Returns
    -------
    ResolutionBound
        ``degenerate`` is set (and ``Lambda`` is ``None``) for ``k = N``,
        where only a single example would remain.
    """
    profile = margin_profile(rho, data)
    if not (1 <= k <= profile.N):
        raise BoundError(f"k must lie in [1, {profile.N}], got {k}")
    if k == profile.N and profile.N > 1:
        return ResolutionBound(None, k, math.nan, k - 1, degenerate=True)
    return _bound_at(profile, k)


def round_to_grid(rho: Sequence[float], Lambda: int) -> np.ndarray:
    """Round the unit-normalized ``rho`` onto the grid of multiples of ``1 / Lambda``.

    Returns integers ``round(Lambda * rho_j / ||rho||_2)`` with halves rounded
    away from zero, so every entry satisfies ``|lambda_j| <= Lambda``.

    Examples
    --------
    >>> round_to_grid([3.0, 4.0], 10).tolist()
    [6, 8]
    """
    if Lambda < 1:
        raise BoundError("Lambda must be at least 1")
    rho = np.asarray(rho, dtype=float)
    norm = float(np.linalg.norm(rho))
    if norm == 0.0:
        raise BoundError("rho must be nonzero")
    z = Lambda * rho / norm
    out = np.sign(z) * np.floor(np.abs(z) + 0.5)
    return np.clip(out, -Lambda, Lambda).astype(np.int64)


def zero_one_loss(coef: Sequence[float], data: Dataset | np.ndarray, y: Sequence[int] | None = None) -> int:
    """Count of examples with ``y_i coef . x_i <= 0`` (no intercept)."""
    X = _features(data)
    if y is None:
        if not isinstance(data, Dataset):
            raise BoundError("labels are required for a raw feature matrix")
        y = data.y
    y = np.asarray(y, dtype=float)
    return int(np.sum(y * (X @ np.asarray(coef, dtype=float)) <= 0))


def occam_gap(hypothesis_count: int, N: int, delta: float) -> float:
    """Uniform deviation between true and empirical risk over a finite class.

    ``sqrt((log |H| - log delta) / (2 N))``.

    Examples
    --------
    >>> round(occam_gap(1024, 1000, 0.01), 4)
    0.0759
    """
    if hypothesis_count < 1:
        raise BoundError("hypothesis_count must be at least 1")
    if N < 1:
        raise BoundError("N must be at least 1")
    if not (0.0 < delta <= 1.0):
        raise BoundError("delta must lie in (0, 1]")
    return math.sqrt((_log_int(hypothesis_count) - math.log(delta)) / (2.0 * N))


def _log_int(n: int) -> float:
    """Natural log of a possibly huge integer."""
    n = int(n)
    bits = n.bit_length()
    if bits < 1000:
        return math.log(n)
    shift = bits - 64
    return math.log(n >> shift) + shift * math.log(2.0)


def _max_support(P: int, C0: float) -> int:
    if C0 <= 0:
        raise BoundError("C0 must be positive")
    # floor(1 / C0) with protection against 1/0.2 = 4.999...
    q = 1.0 / C0
    r = round(q)
    k = int(r) if abs(q - r) <= 1e-9 * max(1.0, q) else int(math.floor(q))
    return min(P, k)


def l0_hypothesis_count(P: int, Lambda: int, C0: float) -> int:
    """Number of vectors in ``(Z ∩ [-Lambda, Lambda])^P`` with at most ``floor(1/C0)`` nonzeros.

    An L0 penalty of ``C0`` per feature rules out any model with more than
    ``floor(1 / C0)`` features, because the zero model already scores at most 1.

    Examples
    --------
    >>> l0_hypothesis_count(2, 1, 0.6)
    5
    """
    if P < 0 or Lambda < 0:
        raise BoundError("P and Lambda must be non-negative")
    kmax = _max_support(P, C0)
    return sum(math.comb(P, k) * (2 * Lambda) ** k for k in range(kmax + 1))


def l0_hypothesis_count_enumerated(P: int, Lambda: int, C0: float) -> int:
    """Brute-force version of :func:`l0_hypothesis_count`."""
    kmax = _max_support(P, C0)
    vals = range(-Lambda, Lambda + 1)
    return sum(1 for v in itertools.product(vals, repeat=P) if sum(x != 0 for x in v) <= kmax)


def _mobius_table(n: int) -> list[int]:
    mu = [1] * (n + 1)
    is_prime = [True] * (n + 1)
    for p in range(2, n + 1):
        if is_prime[p]:
            for m in range(p, n + 1, p):
                if m > p:
                    is_prime[m] = False
                mu[m] = -mu[m]
            for m in range(p * p, n + 1, p * p):
                mu[m] = 0
    return mu


def coprime_count(P: int, Lambda: int) -> tuple[int, float]:
    """Count nonzero vectors of ``(Z ∩ [-Lambda, Lambda])^P`` whose entries have gcd 1.

    Uses Möbius inversion over the common divisor ``d``: the nonzero vectors
    whose entries are all multiples of ``d`` number ``(2 floor(Lambda/d) + 1)^P - 1``.

    Returns
    -------
    (count, density)
        ``density`` is ``count / (2 Lambda + 1)^P``.

    Examples
    --------
    >>> coprime_count(2, 1)
    (8, 0.8888888888888888)
    """
    if P < 1 or Lambda < 0:
        raise BoundError("P must be positive and Lambda non-negative")
    mu = _mobius_table(max(Lambda, 1))
    count = sum(mu[d] * ((2 * (Lambda // d) + 1) ** P - 1) for d in range(1, Lambda + 1))
    return count, count / (2 * Lambda + 1) ** P


def coprime_count_enumerated(P: int, Lambda: int, budget: int = ENUMERATION_BUDGET) -> tuple[int, float]:
    """Direct gcd enumeration version of :func:`coprime_count`.

    Raises
    ------
    BoundError
        When ``(2 Lambda + 1)^P`` exceeds ``budget``.
    """
    total = (2 * Lambda + 1) ** P
    if total > budget:
        raise BoundError(f"enumeration of {total} vectors exceeds the budget of {budget}")
    grid = np.arange(-Lambda, Lambda + 1, dtype=np.int64)
    mesh = np.stack(np.meshgrid(*([grid] * P), indexing="ij"), axis=-1).reshape(-1, P)
    g = np.gcd.reduce(np.abs(mesh), axis=1)
    count = int(np.sum(g == 1))
    return count, count / total


def density_table(
    P_values: Iterable[int], Lambda_values: Iterable[int], N: int = 1000, delta: float = 0.01
) -> list[dict]:
    """Rows of coprime counts and the generalization-gap gain from using them.

    ``occam_gain`` is the gap over the full box minus the gap over the coprime
    vectors, both at sample size ``N`` and confidence ``delta``.
    """
    rows = []
    Lambdas = list(Lambda_values)
    for P in P_values:
        for lam in Lambdas:
            count, density = coprime_count(P, lam)
            full = (2 * lam + 1) ** P
            gain = occam_gap(full, N, delta) - occam_gap(max(count, 1), N, delta)
            rows.append({"P": P, "Lambda": lam, "count": count, "density": density, "occam_gain": gain, "N": N})
    return rows


def write_density_csv(path: str | Path, rows: Sequence[dict]) -> None:
    """Write :func:`density_table` rows as CSV."""
    fields = ["P", "Lambda", "count", "density", "occam_gain", "N"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for r in rows:
            w.writerow({k: r[k] for k in fields})

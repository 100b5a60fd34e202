"""Finite admissible value sets for model coefficients."""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

__all__ = ["InterpretabilitySet", "digit_pattern_values", "SIGN_CHOICES"]

SIGN_CHOICES = ("free", "nonneg", "nonpos")


def digit_pattern_values(max_abs: int, significant_digits: int = 1) -> list[int]:
    """Integers in ``[-max_abs, max_abs]`` with few significant digits.

    With one significant digit this gives ``0, ±1..±9, ±10, ±20, ..., ±90,
    ±100, ...``; such values are easy to add up by hand.

    Examples
    --------
    >>> digit_pattern_values(30)
    [-30, -20, -10, -9, -8, -7, -6, -5, -4, -3, -2, -1, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 20, 30]
    """
    if max_abs < 0 or significant_digits < 1:
        raise ValueError("max_abs must be >= 0 and significant_digits >= 1")
    keep = {0}
    for v in range(1, max_abs + 1):
        digits = str(v).rstrip("0")
        if len(digits) <= significant_digits:
            keep.add(v)
            keep.add(-v)
    return sorted(keep)


class InterpretabilitySet:
    """Per-coefficient finite value lists ``L_0, ..., L_P``.

    Index 0 is the intercept.  Every list is sorted, duplicate-free and
    contains 0.

    Parameters
    ----------
    values : sequence of sequences of float
        Admissible values for each coefficient.

    Raises
    ------
    ValueError
        If some list is empty or does not contain 0.
    """

    def __init__(self, values: Sequence[Sequence[float]]):
        cleaned = []
        for j, vals in enumerate(values):
            arr = np.unique(np.asarray(list(vals), dtype=float))
            if arr.size == 0:
                raise ValueError(f"value set {j} is empty")
            if not np.any(arr == 0.0):
                raise ValueError(f"value set {j} must contain 0")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"value set {j} contains non-finite values")
            arr.setflags(write=False)
            cleaned.append(arr)
        if not cleaned:
            raise ValueError("at least the intercept value set is required")
        self.values: tuple[np.ndarray, ...] = tuple(cleaned)

    # constructors -----------------------------------------------------

    @classmethod
    def bounded(cls, P: int, bound: int, intercept_bound: int | None = None) -> "InterpretabilitySet":
        """Integer sets ``Z ∩ [-bound, bound]`` for every feature.

        Parameters
        ----------
        P : int
            Number of non-intercept coefficients.
        bound : int
            Feature coefficient bound Λ.
        intercept_bound : int, optional
            Intercept bound; defaults to ``bound``.
        """
        ib = bound if intercept_bound is None else intercept_bound
        return cls([range(-ib, ib + 1)] + [range(-bound, bound + 1)] * P)

    @classmethod
    def from_bounds(cls, lower: Sequence[int], upper: Sequence[int]) -> "InterpretabilitySet":
        """Integer intervals with per-coefficient bounds (each must straddle 0)."""
        return cls([range(int(lo), int(hi) + 1) for lo, hi in zip(lower, upper)])

    # queries ----------------------------------------------------------

    @property
    def n_coef(self) -> int:
        return len(self.values)

    @property
    def P(self) -> int:
        return len(self.values) - 1

    def __getitem__(self, j: int) -> np.ndarray:
        return self.values[j]

    def __len__(self) -> int:
        return len(self.values)

    def __repr__(self) -> str:
        parts = []
        for v in self.values:
            if self._contiguous(v):
                parts.append(f"[{v[0]:g}..{v[-1]:g}]")
            else:
                parts.append("{" + ",".join(f"{x:g}" for x in v) + "}")
        return f"InterpretabilitySet({', '.join(parts)})"

    @staticmethod
    def _contiguous(v: np.ndarray) -> bool:
        return bool(np.all(v == np.round(v)) and (v.size == 1 or np.all(np.diff(v) == 1.0)))

    def is_contiguous(self, j: int) -> bool:
        """True when ``L_j`` is an interval of consecutive integers."""
        return self._contiguous(self.values[j])

    def lower(self, j: int) -> float:
        return float(self.values[j][0])

    def upper(self, j: int) -> float:
        return float(self.values[j][-1])

    def max_abs(self, j: int) -> float:
        return float(np.max(np.abs(self.values[j])))

    def cardinality(self) -> int:
        """Number of coefficient vectors, ``prod_j |L_j|`` (exact integer)."""
        n = 1
        for v in self.values:
            n *= int(v.size)
        return n

    def max_l1_norm(self) -> float:
        """Largest L1 norm of the non-intercept part over the set."""
        return float(sum(self.max_abs(j) for j in range(1, self.n_coef)))

    def contains(self, lam: Sequence[float]) -> bool:
        lam = np.asarray(lam, dtype=float)
        if lam.shape != (self.n_coef,):
            return False
        return all(bool(np.any(np.isclose(self.values[j], lam[j], rtol=0, atol=1e-9))) for j in range(self.n_coef))

    def index_of(self, j: int, value: float) -> int:
        """Position of ``value`` in ``L_j``."""
        k = int(np.searchsorted(self.values[j], value - 1e-9))
        if k >= self.values[j].size or abs(self.values[j][k] - value) > 1e-9:
            raise ValueError(f"{value} is not in value set {j}")
        return k

    def nearest(self, j: int, value: float) -> float:
        """Element of ``L_j`` closest to ``value`` (ties go to the smaller magnitude)."""
        v = self.values[j]
        k = int(np.searchsorted(v, value))
        best = None
        for c in (k - 1, k):
            if 0 <= c < v.size:
                cand = float(v[c])
                key = (abs(cand - value), abs(cand))
                if best is None or key < best[0]:
                    best = (key, cand)
        assert best is not None
        return best[1]

    # transformations -----------------------------------------------

    def with_signs(self, signs: Mapping[int, str]) -> "InterpretabilitySet":
        """Restrict coefficients to be non-negative or non-positive.

        Parameters
        ----------
        signs : mapping of int to str
            Coefficient index to one of ``"free"``, ``"nonneg"`` or ``"nonpos"``.
        """
        vals = [v.copy() for v in self.values]
        for j, s in signs.items():
            if s not in SIGN_CHOICES:
                raise ValueError(f"unknown sign restriction {s!r}")
            if not (0 <= j < self.n_coef):
                raise ValueError(f"sign restriction on unknown coefficient {j}")
            if s == "nonneg":
                vals[j] = vals[j][vals[j] >= 0]
            elif s == "nonpos":
                vals[j] = vals[j][vals[j] <= 0]
            if vals[j].size == 0:
                raise ValueError(f"sign restriction leaves coefficient {j} without values")
        return InterpretabilitySet(vals)

    def replace(self, j: int, values: Sequence[float]) -> "InterpretabilitySet":
        vals = list(self.values)
        vals[j] = np.asarray(values, dtype=float)
        return InterpretabilitySet(vals)

    def to_list(self) -> list[list[float]]:
        return [v.tolist() for v in self.values]

"""Removing training examples whose predicted label is settled in advance.

A convex proxy (here the LP relaxation of the training program) is solved
once to get baseline labels.  For each example a variant of the proxy is
solved with the extra constraint that the example receives the other label.
If even the best such variant is worse than the proxy optimum plus a level-set
width, no optimal model can give the example the other label, so the example
can be dropped from training.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import Dataset
from .formulation import IntegerProgram
from .solver import SolverError, _HighsRelaxation

__all__ = [
    "ReductionError",
    "ReductionConfig",
    "ReductionResult",
    "LevelSetCertificate",
    "CertificateCheck",
    "reduce",
    "epsilon_from_feasible",
    "check_level_set_certificate",
    "relaxation_optimum",
]

PROXY_KINDS = ("convex-relaxation",)

# slack on the removal test guarding against LP round-off
_REMOVE_TOL = 1e-7


class ReductionError(ValueError):
    """Raised for invalid reduction inputs."""


@dataclass(frozen=True)
class ReductionConfig:
    """Settings of a reduction run.

    Attributes
    ----------
    level_set_width : float
        Width ``eps`` of the proxy level set; an example is removed when its
        variant optimum exceeds ``proxy optimum + eps``.
    proxy : str
        Proxy problem kind; only the LP relaxation of the program is provided.
    """

    level_set_width: float
    proxy: str = "convex-relaxation"

    def __post_init__(self) -> None:
        if not (self.level_set_width >= 0):
            raise ReductionError("level_set_width must be non-negative")
        if self.proxy not in PROXY_KINDS:
            raise ReductionError(f"unknown proxy {self.proxy!r}; choose from {PROXY_KINDS}")


@dataclass
class ReductionResult:
    """Outcome of :func:`reduce`.

    Attributes
    ----------
    dataset : Dataset
        The kept examples (keeps the original loss denominator so that
        per-example weights do not change).
    kept : numpy.ndarray
        Indices of kept examples.
    removed : numpy.ndarray
        Indices of removed examples.
    fixed_labels : numpy.ndarray
        Baseline label of every example (``+1`` / ``-1``); for removed
        examples this is the label every optimal model assigns.
    proxy_objective : float
        Optimal value of the proxy.
    variant_objectives : numpy.ndarray
        Optimal value of each example's variant (``inf`` when infeasible).
    level_set_width : float
        The width used.
    """

    dataset: Dataset
    kept: np.ndarray
    removed: np.ndarray
    fixed_labels: np.ndarray
    proxy_objective: float
    variant_objectives: np.ndarray
    level_set_width: float
    infeasible_variants: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def agrees(self, X: np.ndarray, coefficients: np.ndarray, margin: float = 0.0) -> bool:
        """Whether ``coefficients`` give every removed example its fixed label.

        A model trained on the reduced data that passes this check is optimal
        for the full data whenever the level-set width was valid.  One that
        fails it may not be: dropping examples lowers the objective of models
        that mislabel them, so such a model can win on the reduced data alone.

        Parameters
        ----------
        X : numpy.ndarray
            Full design matrix (intercept in column 0).
        coefficients : numpy.ndarray
            Coefficient vector to check.
        margin : float
            Decision margin; positive predictions need ``score > -margin``
            when it is non-zero and ``score >= 0`` otherwise.
        """
        S = np.asarray(X, dtype=float)[self.removed] @ np.asarray(coefficients, dtype=float)
        pos = S >= 0 if margin == 0 else S > -margin
        return bool(np.all(np.where(pos, 1, -1) == self.fixed_labels[self.removed]))

    def removed_at(self, width: float) -> np.ndarray:
        """Indices that would be removed at another level-set width (no new solves)."""
        return np.flatnonzero(self.variant_objectives > self.proxy_objective + width + _REMOVE_TOL)

    def to_csv(self, path: str | Path) -> None:
        """One row per example: ``index, baseline_label, variant_objective, removed``."""
        removed = set(self.removed.tolist())
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "baseline_label", "variant_objective", "removed"])
            for i, (lab, v) in enumerate(zip(self.fixed_labels, self.variant_objectives)):
                w.writerow([i, int(lab), repr(float(v)), int(i in removed)])


class _VariantLP:
    """The relaxation with room for one extra row at a time."""

    def __init__(self, ip: IntegerProgram):
        self.ip = ip
        self.relax = _HighsRelaxation(ip)
        self.h = self.relax.h

    def base(self) -> tuple[float, np.ndarray]:
        status, val, x = self.relax.solve(self.ip.lb, self.ip.ub)
        if status != "optimal" or x is None:
            raise ReductionError(f"proxy relaxation is {status}")
        return val, x

    def with_row(self, idx: np.ndarray, val: np.ndarray, hi: float) -> tuple[str, float]:
        h = self.h
        h.addRow(-self.relax.inf, hi, idx.size, idx.astype(np.int32), val.astype(float))
        r = h.getNumRow() - 1
        try:
            status, value, _ = self.relax.solve(self.ip.lb, self.ip.ub)
        finally:
            h.deleteRows(1, np.array([r], dtype=np.int32))
        if status == "error":
            raise SolverError("variant relaxation failed")
        return status, value


def relaxation_optimum(ip: IntegerProgram) -> float:
    """Optimal value of the LP relaxation of ``ip``."""
    return _VariantLP(ip).base()[0]


def reduce(ip: IntegerProgram, dataset: Dataset, config: ReductionConfig) -> ReductionResult:
    """Drop examples whose label is the same under every near-optimal proxy solution.

    Parameters
    ----------
    ip : IntegerProgram
        Training program built from ``dataset`` (any model family).
    dataset : Dataset
        The data ``ip`` was built from.
    config : ReductionConfig
        Level-set width.

    Returns
    -------
    ReductionResult

    Raises
    ------
    ReductionError
        If the width would remove every example, or if ``ip`` carries false-positive, false-negative or budget
        constraints: removed examples would silently drop out of those counts.

    Notes
    -----
    The flipped-label constraint is ``y~_i lambda . x_i <= 0``.  Under the
    "score 0 predicts +1" convention this is exact for examples whose
    baseline label is ``-1`` and a slight enlargement of the variant's
    feasible set for baseline ``+1``; enlarging a variant can only lower its
    optimum, so fewer examples are removed and the equivalence guarantee is
    preserved.
    """
    if ip.coef_vars is None:
        raise ReductionError("program has no coefficient variables")
    if ip.problem is not None and ip.problem.ops.has_rate_constraints:
        raise ReductionError("reduction is not supported together with error-rate or budget constraints")
    if ip.problem is not None and ip.problem.N != dataset.N:
        raise ReductionError("program and dataset disagree on the number of examples")
    lp = _VariantLP(ip)
    z0, x0 = lp.base()
    coef = np.asarray(ip.coef_vars)
    lam = x0[coef]
    scores = dataset.X @ lam
    labels = np.where(scores >= 0, 1, -1)
    variant = np.empty(dataset.N)
    infeasible = []
    for i in range(dataset.N):
        row = labels[i] * dataset.X[i]
        nz = np.flatnonzero(row)
        status, val = lp.with_row(coef[nz], row[nz], 0.0)
        if status == "infeasible":
            variant[i] = math.inf
            infeasible.append(i)
        elif status == "unbounded":
            variant[i] = -math.inf
        else:
            variant[i] = val
    width = float(config.level_set_width)
    removed = np.flatnonzero(variant > z0 + width + _REMOVE_TOL)
    kept = np.setdiff1d(np.arange(dataset.N), removed)
    if kept.size == 0:
        raise ReductionError(
            f"level-set width {width:g} removes every example; use a width of at least "
            "(objective of a feasible model) - (relaxation optimum)"
        )
    return ReductionResult(
        dataset=dataset.subset(kept, keep_denominator=True),
        kept=kept,
        removed=removed,
        fixed_labels=labels,
        proxy_objective=z0,
        variant_objectives=variant,
        level_set_width=width,
        infeasible_variants=np.array(infeasible, dtype=int),
    )


def epsilon_from_feasible(feasible_objective: float, relaxation_objective: float, tol: float = 1e-9) -> float:
    """Level-set width implied by a feasible model.

    Any feasible model's objective bounds the optimum from above, and the
    relaxation optimum bounds everything from below, so their difference is a
    valid width.

    Raises
    ------
    ReductionError
        If the feasible objective is below the relaxation optimum.

    Examples
    --------
    >>> epsilon_from_feasible(1.0, 0.25)
    0.75
    """
    d = float(feasible_objective) - float(relaxation_objective)
    if d < -tol * max(1.0, abs(feasible_objective)):
        raise ReductionError(
            f"feasible objective {feasible_objective} is below the relaxation optimum {relaxation_objective}"
        )
    return max(d, 0.0)


@dataclass(frozen=True)
class LevelSetCertificate:
    """Constants of a proxy loss that certify a level-set width.

    Attributes
    ----------
    lipschitz : float
        Lipschitz constant of the proxy objective near its minimizer.
    radius : float
        Radius of the region where the Lipschitz bound holds.
    c_lambda : float
        Distance beyond which the proxy objective has risen by ``c_psi``.
    c_psi : float
        Guaranteed rise of the proxy objective at distance ``c_lambda``.
    """

    lipschitz: float
    radius: float
    c_lambda: float
    c_psi: float

    def __post_init__(self) -> None:
        for name in ("lipschitz", "radius", "c_lambda", "c_psi"):
            if not getattr(self, name) > 0:
                raise ReductionError(f"{name} must be positive")


@dataclass(frozen=True)
class CertificateCheck:
    satisfied: bool
    epsilon: float
    reason: str = ""


def check_level_set_certificate(cert: LevelSetCertificate) -> CertificateCheck:
    """Check ``c_psi > 2 * lipschitz * c_lambda`` and report ``eps = lipschitz * c_lambda``.

    Examples
    --------
    >>> check_level_set_certificate(LevelSetCertificate(1.0, 1.0, 0.1, 0.3)).satisfied
    True
    """
    eps = cert.lipschitz * cert.c_lambda
    if cert.c_psi > 2.0 * eps:
        return CertificateCheck(True, eps)
    return CertificateCheck(False, eps, f"curvature {cert.c_psi} does not exceed 2 * eps = {2.0 * eps}")

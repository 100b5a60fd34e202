"""Integer programming formulations of discrete linear classifiers.

Four model families are supported:

``slim``
    Scoring systems: weighted 0-1 loss, L0 penalty and a tiny L1 tie-breaker.
``pilm``
    Personalized models: coefficients drawn from tiered value sets, each tier
    with its own price.
``mofn``
    M-of-N rule tables trained on binary rules.
``tilm``
    Threshold-rule models: few thresholds per original feature, with
    sign agreement and a per-feature rule cap.

Each builder returns an :class:`IntegerProgram` (variables, linear rows and a
linear objective) together with a :class:`~discreteclf.problem.DiscreteProblem`
mirror that evaluates the same objective directly from coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .coefsets import InterpretabilitySet
from .data import ClassWeights, Dataset, make_weights
from .problem import DiscreteProblem, OperationalConstraints, _cap

__all__ = [
    "FormulationError",
    "PenaltyConfig",
    "PersonalizedLevels",
    "BigMParameters",
    "IntegerProgram",
    "default_margin",
    "compute_big_m",
    "default_l1_tiebreak",
    "adjust_penalty_for_missing",
    "example_weights",
    "build_slim",
    "build_pilm",
    "build_mofn",
    "build_tilm",
    "build_program",
    "add_operational_constraints",
]

INF = math.inf

# branching priorities (higher is branched on first)
PRIORITY_COEF = 3
PRIORITY_SELECT = 3
PRIORITY_INDICATOR = 1


class FormulationError(ValueError):
    """Raised when a formulation cannot be built from its inputs."""


@dataclass(frozen=True)
class PersonalizedLevels:
    """Tiered value sets with increasing prices.

    Attributes
    ----------
    sets : tuple of tuple of float
        Value set of each level; level sets must be disjoint and their union
        must contain 0.
    costs : tuple of float
        Price of each level, strictly increasing.
    """

    sets: tuple[tuple[float, ...], ...]
    costs: tuple[float, ...]

    def __post_init__(self) -> None:
        sets = tuple(tuple(float(v) for v in s) for s in self.sets)
        costs = tuple(float(c) for c in self.costs)
        object.__setattr__(self, "sets", sets)
        object.__setattr__(self, "costs", costs)
        if len(sets) != len(costs) or not sets:
            raise FormulationError("need one cost per level set")
        if any(b <= a for a, b in zip(costs, costs[1:])):
            raise FormulationError("level costs must be strictly increasing")
        seen: dict[float, int] = {}
        for r, s in enumerate(sets):
            for v in s:
                if v in seen and seen[v] != r:
                    raise FormulationError(f"value {v:g} appears in level {seen[v]} and level {r}")
                seen[v] = r
        if 0.0 not in seen:
            raise FormulationError("some level must contain 0")

    @classmethod
    def default(cls) -> "PersonalizedLevels":
        """Three tiers: {0} free, ±1..10 at 0.01, ±11..100 at 0.05."""
        small = [v for v in range(-10, 11) if v != 0]
        large = [v for v in range(-100, 101) if abs(v) > 10]
        return cls(((0.0,), tuple(small), tuple(large)), (0.0, 0.01, 0.05))

    def values_and_costs(self) -> tuple[np.ndarray, np.ndarray]:
        pairs = sorted((v, self.costs[r]) for r, s in enumerate(self.sets) for v in s)
        return np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])


@dataclass(frozen=True)
class PenaltyConfig:
    """Interpretability penalty of a model family.

    Attributes
    ----------
    kind : str
        ``"slim"``, ``"pilm"``, ``"mofn"`` or ``"tilm"``.
    C0 : float
        Price of each non-zero coefficient (SLIM) or rule (M-of-N).
    C0_per_feature : mapping of int to float, optional
        Overrides of ``C0`` for individual coefficients.
    l1_tiebreak_weight : float, optional
        Weight of the L1 tie-breaker; derived automatically when omitted.
    levels : PersonalizedLevels, optional
        Tiers for PILM.
    feature_cost, rule_cost : float
        TILM prices for using a feature and for each additional threshold rule.
    max_rules : int
        TILM cap on rules per feature.
    """

    kind: str = "slim"
    C0: float = 0.01
    C0_per_feature: Mapping[int, float] = field(default_factory=dict)
    l1_tiebreak_weight: float | None = None
    levels: PersonalizedLevels | None = None
    feature_cost: float = 0.01
    rule_cost: float = 0.005
    max_rules: int = 3


@dataclass(frozen=True)
class BigMParameters:
    """Margin and per-example Big-M constants of the loss constraints."""

    margin: float
    M: np.ndarray


def default_margin(dataset: Dataset) -> float:
    """0.5 when every feature is binary, otherwise 0.1."""
    return 0.5 if dataset.is_binary() else 0.1


def compute_big_m(dataset: Dataset, L: InterpretabilitySet, margin: float) -> BigMParameters:
    """Smallest valid Big-M constants for the loss constraints.

    ``M_i = margin + sum_j max_{v in L_j} (-y_i v x_ij)``.  The maximum is
    separable because the coefficient set is a product of per-coordinate sets,
    and linear in ``v``, so only the extremes of each ``L_j`` matter.
    """
    if margin <= 0:
        raise FormulationError("margin must be positive")
    if L.n_coef != dataset.P + 1:
        raise FormulationError("value sets do not match the number of features")
    lo = np.array([L.lower(j) for j in range(L.n_coef)])
    hi = np.array([L.upper(j) for j in range(L.n_coef)])
    Z = -dataset.y[:, None] * dataset.X
    M = margin + np.maximum(Z * lo, Z * hi).sum(axis=1)
    return BigMParameters(float(margin), M)


def default_l1_tiebreak(
    C0: float | Sequence[float], N: int, L: InterpretabilitySet, min_weight: float | None = None
) -> float:
    """Half the largest L1 tie-breaking weight that cannot trade accuracy or sparsity.

    The weight must satisfy ``eps * max ||lambda_{1..P}||_1 < min(unit, C0)``
    where ``unit`` is the smallest change in loss (``1/N`` for unweighted
    problems, ``min_weight`` otherwise).  When the prices of all features
    together stay below ``unit``, the cap also shrinks to ``unit - sum(C0)``
    so that the whole penalty of any model remains worth less than one
    error, and minimizing the objective then minimizes the error first.

    Raises
    ------
    FormulationError
        If every non-intercept value set is ``{0}``.
    """
    l1 = L.max_l1_norm()
    if l1 <= 0:
        raise FormulationError("all non-intercept value sets are {0}; no tie-breaker is possible")
    c = np.atleast_1d(np.asarray(C0, dtype=float))
    c = c[c > 0]
    unit = (1.0 / N) if min_weight is None else float(min_weight)
    cap = min(unit, float(c.min())) if c.size else unit
    total = float(c.sum())
    if 0.0 < total < unit:
        cap = min(cap, unit - total)
    return 0.5 * cap / l1


def adjust_penalty_for_missing(C0: float, missing: int, N: int) -> float:
    """Raise a feature's price by the fraction of its values that were imputed.

    Returns ``C0 + missing / N``.  At ``missing == N`` the price is at least 1,
    which exceeds any possible loss reduction, so the feature is never used.
    """
    if missing < 0 or missing > N:
        raise FormulationError("missing count must lie in [0, N]")
    return C0 + missing / N


def example_weights(dataset: Dataset, weights: ClassWeights | None) -> np.ndarray:
    """Per-example loss weights ``2 W_{y_i} / N`` (``N`` = loss denominator)."""
    weights = weights or make_weights(dataset, "unweighted")
    return weights.per_example(dataset.y) / dataset.denominator


class IntegerProgram:
    """A mixed-integer linear program, minimized.

    Variables have a kind (``"B"`` binary, ``"I"`` integer, ``"C"`` continuous)
    and bounds.  Rows are ``row_lo <= A x <= row_hi``.  Variable roles record
    which family each variable belongs to (``lambda``, ``psi``, ``alpha``, ...).

    Programs built by the classifier builders also carry ``problem`` (the
    direct evaluator), ``coef_vars`` (the coefficient variables) and a
    completion routine that turns a coefficient vector into a full feasible
    assignment.
    """

    def __init__(self, family: str = "generic"):
        self.family = family
        self.names: list[str] = []
        self._vtype: list[str] = []
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._obj: list[float] = []
        self._prio: list[int] = []
        self.roles: dict[str, dict] = {}
        self._rows: list[tuple[np.ndarray, np.ndarray]] = []
        self._row_lo: list[float] = []
        self._row_hi: list[float] = []
        self.row_names: list[str] = []
        self.objective_offset = 0.0
        self.problem: DiscreteProblem | None = None
        self.coef_vars: np.ndarray | None = None
        self.big_m: BigMParameters | None = None
        self.l1_tiebreak_weight: float = 0.0
        self.zero_violations: list[str] = []
        self._completers: list[Callable[[np.ndarray, np.ndarray, np.ndarray], None]] = []
        self._cache: dict | None = None

    # -- construction ----------------------------------------------------

    def add_var(
        self,
        name: str,
        vtype: str,
        lb: float,
        ub: float,
        obj: float = 0.0,
        role: str | None = None,
        key=None,
        priority: int = 0,
    ) -> int:
        if vtype not in ("B", "I", "C"):
            raise FormulationError(f"unknown variable kind {vtype!r}")
        if vtype == "B":
            lb, ub = max(lb, 0.0), min(ub, 1.0)
        idx = len(self.names)
        self.names.append(name)
        self._vtype.append(vtype)
        self._lb.append(float(lb))
        self._ub.append(float(ub))
        self._obj.append(float(obj))
        self._prio.append(priority)
        if role is not None:
            self.roles.setdefault(role, {})[idx if key is None else key] = idx
        self._cache = None
        return idx

    def add_row(self, name: str, idx: Sequence[int], val: Sequence[float], lo: float = -INF, hi: float = INF) -> int:
        idx = np.asarray(idx, dtype=int)
        val = np.asarray(val, dtype=float)
        keep = val != 0
        idx, val = idx[keep], val[keep]
        if idx.size and (idx.min() < 0 or idx.max() >= len(self.names)):
            raise FormulationError(f"row {name!r} references an undeclared variable")
        self._rows.append((idx, val))
        self._row_lo.append(float(lo))
        self._row_hi.append(float(hi))
        self.row_names.append(name)
        self._cache = None
        return len(self._rows) - 1

    def set_objective(self, idx: int, coef: float) -> None:
        self._obj[idx] = float(coef)
        self._cache = None

    def set_bounds(self, idx: int, lb: float, ub: float) -> None:
        self._lb[idx] = float(lb)
        self._ub[idx] = float(ub)
        self._cache = None

    def add_completer(self, fn: Callable[[np.ndarray, np.ndarray, np.ndarray], None]) -> None:
        """Register ``fn(lam, scores, x)`` which fills part of ``x`` from ``lam``."""
        self._completers.append(fn)

    # -- matrix view -------------------------------------------------------

    def _arrays(self) -> dict:
        if self._cache is None:
            n = len(self.names)
            rows, cols, vals = [], [], []
            for r, (idx, val) in enumerate(self._rows):
                rows.append(np.full(idx.size, r))
                cols.append(idx)
                vals.append(val)
            if rows:
                A = sp.csr_matrix(
                    (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                    shape=(len(self._rows), n),
                )
            else:
                A = sp.csr_matrix((0, n))
            vtype = np.array(self._vtype, dtype="<U1")
            self._cache = {
                "A": A,
                "row_lo": np.array(self._row_lo, dtype=float),
                "row_hi": np.array(self._row_hi, dtype=float),
                "lb": np.array(self._lb, dtype=float),
                "ub": np.array(self._ub, dtype=float),
                "c": np.array(self._obj, dtype=float),
                "vtype": vtype,
                "integer": vtype != "C",
                "priority": np.array(self._prio, dtype=int),
            }
        return self._cache

    A = property(lambda self: self._arrays()["A"])
    row_lo = property(lambda self: self._arrays()["row_lo"])
    row_hi = property(lambda self: self._arrays()["row_hi"])
    lb = property(lambda self: self._arrays()["lb"])
    ub = property(lambda self: self._arrays()["ub"])
    c = property(lambda self: self._arrays()["c"])
    vtype = property(lambda self: self._arrays()["vtype"])
    integer_mask = property(lambda self: self._arrays()["integer"])
    branch_priority = property(lambda self: self._arrays()["priority"])

    @property
    def n_vars(self) -> int:
        return len(self.names)

    @property
    def n_rows(self) -> int:
        return len(self._rows)

    def role_indices(self, role: str) -> np.ndarray:
        return np.array(sorted(self.roles.get(role, {}).values()), dtype=int)

    # -- evaluation --------------------------------------------------------

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.c @ x + self.objective_offset)

    def is_feasible(self, x: np.ndarray, tol: float = 1e-6) -> bool:
        """Check bounds, integrality and every row within ``tol``."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_vars,) or not np.all(np.isfinite(x)):
            return False
        if np.any(x < self.lb - tol) or np.any(x > self.ub + tol):
            return False
        xi = x[self.integer_mask]
        if np.any(np.abs(xi - np.round(xi)) > tol):
            return False
        ax = self.A @ x
        scale = tol * np.maximum(1.0, np.abs(ax))
        return bool(np.all(ax >= self.row_lo - scale) and np.all(ax <= self.row_hi + scale))

    def complete(self, lam: np.ndarray) -> np.ndarray | None:
        """Full assignment for coefficient vector ``lam`` (None if not supported)."""
        if self.coef_vars is None or not self._completers or self.problem is None:
            return None
        lam = np.asarray(lam, dtype=float)
        x = np.zeros(self.n_vars)
        x[self.coef_vars] = lam
        scores = self.problem.X @ lam
        for fn in self._completers:
            fn(lam, scores, x)
        return x

    def decode(self, x: np.ndarray) -> np.ndarray:
        """Coefficient vector of an assignment, snapped to the value sets."""
        if self.coef_vars is None or self.problem is None:
            raise FormulationError("program has no coefficient variables")
        raw = np.asarray(x, dtype=float)[self.coef_vars]
        L = self.problem.L
        return np.array([L.nearest(j, raw[j]) for j in range(L.n_coef)])

    def fixed_coefficients(self, lb: np.ndarray, ub: np.ndarray) -> np.ndarray | None:
        """Coefficient vector when the bounds pin every coefficient, else None."""
        if self.coef_vars is None or self.problem is None or not self._completers:
            return None
        cv = self.coef_vars
        lam = lb[cv].copy()
        fixed = lb[cv] == ub[cv]
        for j, (sel, nz) in self.roles.get("_selectors", {}).items():
            on = lb[sel] > 0.5
            off = ub[sel] < 0.5
            if on.sum() == 1:
                lam[j] = nz[on][0]
                fixed[j] = True
            elif np.all(off):
                lam[j] = 0.0
                fixed[j] = True
        for j, (u, vj) in self.roles.get("_levels", {}).items():
            on = lb[u] > 0.5
            if on.sum() == 1:
                lam[j] = vj[on][0]
                fixed[j] = True
            elif (ub[u] > 0.5).sum() == 1:
                lam[j] = vj[ub[u] > 0.5][0]
                fixed[j] = True
        return lam if bool(np.all(fixed)) else None

    def propagate(self, lb: np.ndarray, ub: np.ndarray) -> bool:
        """Tighten loss-indicator bounds implied by the coefficient bounds.

        An example whose score is wrong for every coefficient vector in the
        current box gets ``psi = 1``; one that is correct throughout gets
        ``psi = 0``.  The second fixing is valid for optimization because
        indicators only carry non-negative objective weight and only appear on
        the small side of rate constraints.  Modifies ``lb``/``ub`` in place and
        returns False when the box becomes empty.
        """
        if self.coef_vars is None or self.problem is None or self.big_m is None:
            return True
        info = self.roles.get("_propagation")
        if not info:
            return True
        cv = self.coef_vars
        lo, hi = lb[cv], ub[cv]
        Z = info["yX"]
        smax = np.maximum(Z * lo, Z * hi).sum(axis=1)
        smin = np.minimum(Z * lo, Z * hi).sum(axis=1)
        m = self.big_m.margin
        g = info["g"]
        psi = info["psi"]
        wrong = smax < g - 1e-9
        right = smin >= g - 1e-12
        lb[psi[wrong]] = np.maximum(lb[psi[wrong]], 1.0)
        ub[psi[right]] = np.minimum(ub[psi[right]], 0.0)
        if "z" in info:
            zi, Xp = info["z"], info["Xpos"]
            pmax = np.maximum(Xp * lo, Xp * hi).sum(axis=1)
            pmin = np.minimum(Xp * lo, Xp * hi).sum(axis=1)
            lb[zi[pmin + m > 1e-9]] = np.maximum(lb[zi[pmin + m > 1e-9]], 1.0)
            ub[zi[pmax + m <= 0]] = 0.0
        return bool(np.all(lb <= ub + 1e-9))

    # -- export ------------------------------------------------------------

    def to_lp(self) -> str:
        """Text dump in LP format for cross-checking with external solvers."""

        def term(coef: float, name: str, first: bool) -> str:
            sign = "-" if coef < 0 else ("" if first else "+")
            return f"{sign} {abs(coef):.12g} {name}".strip()

        def expr(idx, val) -> str:
            if len(idx) == 0:
                return "0 " + self.names[0] if self.names else "0"
            return " ".join(term(v, self.names[i], k == 0) for k, (i, v) in enumerate(zip(idx, val)))

        lines = [f"\\ family: {self.family}", "Minimize"]
        c = self.c
        nz = np.flatnonzero(c)
        lines.append(" obj: " + expr(nz, c[nz]))
        lines.append("Subject To")
        for name, (idx, val), lo, hi in zip(self.row_names, self._rows, self._row_lo, self._row_hi):
            e = expr(idx, val)
            if lo == hi:
                lines.append(f" {name}: {e} = {lo:.12g}")
                continue
            if lo > -INF:
                lines.append(f" {name}_lo: {e} >= {lo:.12g}")
            if hi < INF:
                lines.append(f" {name}_hi: {e} <= {hi:.12g}")
        lines.append("Bounds")
        for name, t, lo, hi in zip(self.names, self._vtype, self._lb, self._ub):
            if t == "B":
                if lo > 0 or hi < 1:
                    lines.append(f" {lo:.12g} <= {name} <= {hi:.12g}")
                continue
            los = "-inf" if lo == -INF else f"{lo:.12g}"
            his = "+inf" if hi == INF else f"{hi:.12g}"
            lines.append(f" {los} <= {name} <= {his}")
        gen = [n for n, t in zip(self.names, self._vtype) if t == "I"]
        binv = [n for n, t in zip(self.names, self._vtype) if t == "B"]
        if gen:
            lines.append("General")
            lines.extend(f" {n}" for n in gen)
        if binv:
            lines.append("Binary")
            lines.extend(f" {n}" for n in binv)
        lines.append("End")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# shared pieces


def _check_dims(dataset: Dataset, L: InterpretabilitySet) -> None:
    if L.n_coef != dataset.P + 1:
        raise FormulationError(
            f"value sets cover {L.n_coef} coefficients but the data has {dataset.P + 1} (with intercept)"
        )


def _apply_signs(L: InterpretabilitySet, ops: OperationalConstraints) -> InterpretabilitySet:
    if not ops.signs:
        return L
    try:
        return L.with_signs(ops.signs)
    except ValueError as exc:
        raise FormulationError(str(exc)) from exc


def _add_coefficients(ip: IntegerProgram, L: InterpretabilitySet, names: Sequence[str]) -> np.ndarray:
    """One variable per coefficient.

    Contiguous integer sets become bounded integer variables.  Other sets get
    a continuous coefficient tied to binary selectors (one per non-zero value,
    at most one active), so that ``lambda_j = sum_k l_k u_k``.
    """
    coef = np.empty(L.n_coef, dtype=int)
    for j in range(L.n_coef):
        vals = L.values[j]
        if L.is_contiguous(j):
            coef[j] = ip.add_var(f"lambda_{j}", "I", vals[0], vals[-1], role="lambda", key=j, priority=PRIORITY_COEF)
            continue
        coef[j] = ip.add_var(f"lambda_{j}", "C", vals[0], vals[-1], role="lambda", key=j)
        nz = vals[vals != 0]
        sel = [
            ip.add_var(f"u_{j}_{k}", "B", 0, 1, role="select", key=(j, float(v)), priority=PRIORITY_SELECT)
            for k, v in enumerate(nz)
        ]
        ip.add_row(f"select_{j}", sel, np.ones(len(sel)), hi=1.0)
        ip.add_row(f"value_{j}", [coef[j]] + sel, np.concatenate(([1.0], -nz)), lo=0.0, hi=0.0)
        ip.roles.setdefault("_selectors", {})[j] = (np.array(sel), nz)
    ip.coef_vars = coef

    def fill(lam, scores, x):
        for j, (sel, nz) in ip.roles.get("_selectors", {}).items():
            x[sel] = (np.abs(nz - lam[j]) < 1e-9).astype(float)

    ip.add_completer(fill)
    return coef


def _example_margins(y: np.ndarray, margin: float) -> np.ndarray:
    """Right-hand side of each loss row: 0 for positives, ``margin`` for negatives."""
    return np.where(np.asarray(y) == 1, 0.0, float(margin))


def _add_loss(ip: IntegerProgram, dataset: Dataset, L: InterpretabilitySet, w: np.ndarray, margin: float) -> np.ndarray:
    """Loss indicators ``psi_i`` with ``M_i psi_i >= g_i - y_i lambda^T x_i``.

    ``g_i`` is 0 for positive examples (a score of 0 predicts +1, so it is
    correct) and ``margin`` for negative ones (their score must be strictly
    negative).  ``M_i`` is computed with ``margin`` for every example, which
    is valid since it only over-estimates the needed constant for positives.
    """
    bm = compute_big_m(dataset, L, margin)
    g = _example_margins(dataset.y, margin)
    ip.big_m = bm
    coef = ip.coef_vars
    assert coef is not None
    yX = dataset.y[:, None] * dataset.X
    psi = np.empty(dataset.N, dtype=int)
    for i in range(dataset.N):
        psi[i] = ip.add_var(f"psi_{i}", "B", 0, 1, obj=w[i], role="psi", key=i, priority=PRIORITY_INDICATOR)
    for i in range(dataset.N):
        nz = np.flatnonzero(yX[i])
        ip.add_row(f"loss_{i}", np.concatenate(([psi[i]], coef[nz])), np.concatenate(([bm.M[i]], yX[i, nz])), lo=float(g[i]))
    ip.roles["_propagation"] = {"yX": yX, "psi": psi, "g": g}
    y = dataset.y

    def fill(lam, scores, x):
        x[psi] = (g - y * scores > 1e-12).astype(float)

    ip.add_completer(fill)
    return psi


def _add_l0_l1(
    ip: IntegerProgram, L: InterpretabilitySet, C0: np.ndarray, eps: float, js: Sequence[int], with_phi: bool = True
) -> None:
    """SLIM penalty variables: ``Phi_j = C0_j alpha_j + eps beta_j`` with linking rows."""
    coef = ip.coef_vars
    assert coef is not None
    for j in js:
        lo, hi = L.lower(j), L.upper(j)
        if lo == 0 and hi == 0:
            continue
        a = ip.add_var(f"alpha_{j}", "B", 0, 1, role="alpha", key=j, priority=PRIORITY_COEF)
        b = ip.add_var(f"beta_{j}", "C", 0, L.max_abs(j), role="beta", key=j)
        if with_phi:
            phi = ip.add_var(f"phi_{j}", "C", 0, INF, obj=1.0, role="phi", key=j)
            ip.add_row(f"phi_def_{j}", [phi, a, b], [1.0, -C0[j], -eps], lo=0.0, hi=0.0)
        ip.add_row(f"l0_hi_{j}", [coef[j], a], [1.0, -hi], hi=0.0)
        ip.add_row(f"l0_lo_{j}", [coef[j], a], [1.0, -lo], lo=0.0)
        ip.add_row(f"l1_pos_{j}", [b, coef[j]], [1.0, -1.0], lo=0.0)
        ip.add_row(f"l1_neg_{j}", [b, coef[j]], [1.0, 1.0], lo=0.0)
        sel = ip.roles.get("_selectors", {}).get(j)
        if sel is not None:
            ip.add_row(f"alpha_sel_{j}", np.concatenate(([a], sel[0])), np.concatenate(([1.0], -np.ones(sel[0].size))), lo=0.0, hi=0.0)

    alpha = ip.roles.get("alpha", {})
    beta = ip.roles.get("beta", {})
    phi = ip.roles.get("phi", {})

    def fill(lam, scores, x):
        for j, a in alpha.items():
            x[a] = float(lam[j] != 0)
            x[beta[j]] = abs(lam[j])
            if j in phi:
                x[phi[j]] = C0[j] * x[a] + eps * x[beta[j]]

    ip.add_completer(fill)


def _resolve_C0(C0: float, overrides: Mapping[int, float] | None, n_coef: int) -> np.ndarray:
    c = np.full(n_coef, float(C0))
    c[0] = 0.0
    for j, v in (overrides or {}).items():
        if not (1 <= int(j) < n_coef):
            raise FormulationError(f"C0 override for unknown coefficient {j}")
        c[int(j)] = float(v)
    if np.any(c < 0):
        raise FormulationError("C0 must be non-negative")
    return c


def _finish(
    ip: IntegerProgram,
    dataset: Dataset,
    L: InterpretabilitySet,
    w: np.ndarray,
    costs: Sequence[np.ndarray],
    ops: OperationalConstraints,
    margin: float,
    **group_kw,
) -> IntegerProgram:
    ip.problem = DiscreteProblem(dataset.X, dataset.y, w, L, costs, OperationalConstraints(), margin=margin, **group_kw)
    add_operational_constraints(ip, ops, dataset)
    ip.zero_violations = ip.problem.violated_constraints(np.zeros(L.n_coef), margin) if ip.problem else []
    return ip


# ---------------------------------------------------------------------------
# builders


def build_slim(
    dataset: Dataset,
    L: InterpretabilitySet,
    C0: float = 0.01,
    weights: ClassWeights | None = None,
    ops: OperationalConstraints | None = None,
    C0_per_feature: Mapping[int, float] | None = None,
    l1_tiebreak_weight: float | None = None,
    margin: float | None = None,
) -> IntegerProgram:
    """Scoring-system program: weighted 0-1 loss + L0 penalty + L1 tie-breaker.

    Parameters
    ----------
    dataset : Dataset
        Training data (numeric columns).
    L : InterpretabilitySet
        Admissible coefficient values; index 0 is the unpenalized intercept.
    C0 : float
        Price of each non-zero feature coefficient.
    weights : ClassWeights, optional
        Class weights; unweighted by default.
    ops : OperationalConstraints, optional
        Hard constraints appended to the program.
    C0_per_feature : mapping, optional
        Per-coefficient prices overriding ``C0``.
    l1_tiebreak_weight : float, optional
        Defaults to :func:`default_l1_tiebreak`.
    margin : float, optional
        Loss-constraint margin; defaults to :func:`default_margin`.

    Returns
    -------
    IntegerProgram
    """
    _check_dims(dataset, L)
    ops = ops or OperationalConstraints()
    ops.validate(dataset.P)
    if any(k == "categorical" for k in dataset.kinds):
        raise FormulationError("categorical columns must be expanded with binarize() first")
    L = _apply_signs(L, ops)
    margin = default_margin(dataset) if margin is None else float(margin)
    w = example_weights(dataset, weights)
    c0 = _resolve_C0(C0, C0_per_feature, L.n_coef)
    if l1_tiebreak_weight is None:
        if L.max_l1_norm() > 0:
            pos_w = w[w > 0]
            eps = default_l1_tiebreak(c0[1:], dataset.denominator, L, float(pos_w.min()) if pos_w.size else None)
        else:
            eps = 0.0
    else:
        eps = float(l1_tiebreak_weight)
    ip = IntegerProgram("slim")
    ip.l1_tiebreak_weight = eps
    _add_coefficients(ip, L, dataset.names_with_intercept)
    _add_loss(ip, dataset, L, w, margin)
    _add_l0_l1(ip, L, c0, eps, range(1, L.n_coef))
    costs = [np.zeros(L.values[0].size)] + [
        c0[j] * (L.values[j] != 0) + eps * np.abs(L.values[j]) for j in range(1, L.n_coef)
    ]
    return _finish(ip, dataset, L, w, costs, ops, margin)


def build_pilm(
    dataset: Dataset,
    levels: PersonalizedLevels,
    intercept_values: Sequence[float] = tuple(range(-100, 101)),
    weights: ClassWeights | None = None,
    ops: OperationalConstraints | None = None,
    margin: float | None = None,
) -> IntegerProgram:
    """Personalized model: every feature coefficient picks exactly one value from one tier.

    Each coefficient ``j >= 1`` gets a binary selector per admissible value
    (including 0); exactly one is active, the coefficient equals the selected
    value and its penalty is the selected tier's price.
    """
    ops = ops or OperationalConstraints()
    ops.validate(dataset.P)
    vals, prices = levels.values_and_costs()
    L = InterpretabilitySet([intercept_values] + [vals] * dataset.P)
    L = _apply_signs(L, ops)
    margin = default_margin(dataset) if margin is None else float(margin)
    w = example_weights(dataset, weights)
    ip = IntegerProgram("pilm")
    coef = np.empty(L.n_coef, dtype=int)
    sub = InterpretabilitySet([L.values[0]])
    coef[0] = _add_coefficients(ip, sub, ["(Intercept)"])[0]
    price_of = dict(zip(vals.tolist(), prices.tolist()))
    sel_all: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for j in range(1, L.n_coef):
        vj = L.values[j]
        coef[j] = ip.add_var(f"lambda_{j}", "C", vj[0], vj[-1], role="lambda", key=j)
        u = np.array(
            [ip.add_var(f"u_{j}_{k}", "B", 0, 1, obj=price_of[float(v)], role="select", key=(j, float(v)), priority=PRIORITY_SELECT)
             for k, v in enumerate(vj)]
        )
        ip.add_row(f"one_level_{j}", u, np.ones(u.size), lo=1.0, hi=1.0)
        ip.add_row(f"value_{j}", np.concatenate(([coef[j]], u)), np.concatenate(([1.0], -vj)), lo=0.0, hi=0.0)
        a = ip.add_var(f"alpha_{j}", "B", 0, 1, role="alpha", key=j, priority=PRIORITY_COEF)
        nzu = u[vj != 0]
        ip.add_row(f"alpha_def_{j}", np.concatenate(([a], nzu)), np.concatenate(([1.0], -np.ones(nzu.size))), lo=0.0, hi=0.0)
        sel_all[j] = (u, vj)
    ip.coef_vars = coef
    ip.roles["_levels"] = sel_all
    alpha = ip.roles["alpha"]

    def fill(lam, scores, x):
        for j, (u, vj) in sel_all.items():
            x[u] = (np.abs(vj - lam[j]) < 1e-9).astype(float)
            x[alpha[j]] = float(lam[j] != 0)

    ip.add_completer(fill)
    _add_loss(ip, dataset, L, w, margin)
    costs = [np.zeros(L.values[0].size)] + [np.array([price_of[float(v)] for v in L.values[j]]) for j in range(1, L.n_coef)]
    return _finish(ip, dataset, L, w, costs, ops, margin)


def build_mofn(
    rule_dataset: Dataset,
    C0: float,
    weights: ClassWeights | None = None,
    ops: OperationalConstraints | None = None,
    margin: float | None = None,
) -> IntegerProgram:
    """M-of-N rule table: 0/1 rule coefficients and an integer threshold.

    The intercept ranges over ``Z ∩ [-P_rules, 0]``; a table predicts
    positive when at least ``-lambda_0`` of its selected rules hold.

    Raises
    ------
    FormulationError
        If some non-intercept column is not binary.
    """
    if not rule_dataset.is_binary():
        raise FormulationError("M-of-N tables need binary rule columns; use binarize() first")
    ops = ops or OperationalConstraints()
    ops.validate(rule_dataset.P)
    if any(s == "nonpos" for s in ops.signs.values()):
        raise FormulationError("rule coefficients are 0/1 and cannot be restricted to be non-positive")
    P = rule_dataset.P
    L = InterpretabilitySet([range(-P, 1)] + [(0, 1)] * P)
    margin = default_margin(rule_dataset) if margin is None else float(margin)
    w = example_weights(rule_dataset, weights)
    ip = IntegerProgram("mofn")
    coef = np.empty(L.n_coef, dtype=int)
    coef[0] = ip.add_var("lambda_0", "I", -P, 0, role="lambda", key=0, priority=PRIORITY_COEF)
    for j in range(1, L.n_coef):
        coef[j] = ip.add_var(f"lambda_{j}", "B", 0, 1, obj=C0, role="lambda", key=j, priority=PRIORITY_COEF)
        ip.roles.setdefault("alpha", {})[j] = coef[j]
    ip.coef_vars = coef
    _add_loss(ip, rule_dataset, L, w, margin)
    costs = [np.zeros(L.values[0].size)] + [np.array([0.0, C0])] * P
    return _finish(ip, rule_dataset, L, w, costs, ops, margin)


def build_tilm(
    rule_dataset: Dataset,
    L: InterpretabilitySet,
    feature_cost: float,
    rule_cost: float,
    max_rules: int = 3,
    l1_tiebreak_weight: float | None = None,
    weights: ClassWeights | None = None,
    ops: OperationalConstraints | None = None,
    margin: float | None = None,
) -> IntegerProgram:
    """Threshold-rule model over rules grouped by parent feature.

    Penalty per feature ``j``: ``feature_cost * nu_j + rule_cost * tau_j +
    eps * sum_t |lambda_{j,t}|`` where ``nu_j`` marks a used feature and
    ``tau_j`` counts its rules beyond the first.  At most ``max_rules`` rules
    per feature, and all rule coefficients of a feature share one sign.
    """
    if max_rules < 1:
        raise FormulationError("max_rules must be at least 1")
    _check_dims(rule_dataset, L)
    ops = ops or OperationalConstraints()
    ops.validate(rule_dataset.P)
    L = _apply_signs(L, ops)
    margin = default_margin(rule_dataset) if margin is None else float(margin)
    w = example_weights(rule_dataset, weights)
    if rule_dataset.rule_set is not None:
        groups = [list(g.columns) for g in rule_dataset.rule_set.groups if g.columns]
    else:
        groups = [[j] for j in range(1, rule_dataset.P + 1)]
    if l1_tiebreak_weight is None:
        pos_w = w[w > 0]
        cheapest = min(c for c in (feature_cost, rule_cost) if c > 0) if max(feature_cost, rule_cost) > 0 else 0.0
        eps = (
            default_l1_tiebreak(cheapest if cheapest > 0 else 1.0, rule_dataset.denominator, L, float(pos_w.min()))
            if L.max_l1_norm() > 0
            else 0.0
        )
    else:
        eps = float(l1_tiebreak_weight)
    ip = IntegerProgram("tilm")
    ip.l1_tiebreak_weight = eps
    coef = _add_coefficients(ip, L, rule_dataset.names_with_intercept)
    _add_loss(ip, rule_dataset, L, w, margin)
    # per-rule alpha/beta with zero price; prices are charged per feature
    _add_l0_l1(ip, L, np.zeros(L.n_coef), 0.0, range(1, L.n_coef), with_phi=False)
    alpha, beta = ip.roles.get("alpha", {}), ip.roles.get("beta", {})
    group_vars = []
    for g, cols in enumerate(groups):
        cols = [j for j in cols if j in alpha]
        if not cols:
            continue
        T = len(cols)
        bigL = max(L.max_abs(j) for j in cols)
        nu = ip.add_var(f"nu_{g}", "B", 0, 1, role="nu", key=g, priority=PRIORITY_COEF)
        tau = ip.add_var(f"tau_{g}", "C", 0, max_rules - 1, role="tau", key=g)
        delta = ip.add_var(f"delta_{g}", "B", 0, 1, role="delta", key=g, priority=PRIORITY_COEF)
        phi = ip.add_var(f"phi_feature_{g}", "C", 0, INF, obj=1.0, role="phi_feature", key=g)
        a = [alpha[j] for j in cols]
        b = [beta[j] for j in cols]
        ip.add_row(f"use_{g}", [nu] + a, [float(T)] + [-1.0] * T, lo=0.0)
        ip.add_row(f"extra_{g}", [tau, nu] + a, [1.0, 1.0] + [-1.0] * T, lo=0.0, hi=0.0)
        ip.add_row(
            f"phi_feature_def_{g}", [phi, nu, tau] + b, [1.0, -feature_cost, -rule_cost] + [-eps] * T, lo=0.0, hi=0.0
        )
        for j in cols:
            ip.add_row(f"sign_lo_{g}_{j}", [coef[j], delta], [1.0, -bigL], lo=-bigL)
            ip.add_row(f"sign_hi_{g}_{j}", [coef[j], delta], [1.0, -bigL], hi=0.0)
        group_vars.append((cols, nu, tau, delta, phi))

    def fill(lam, scores, x):
        for cols, nu, tau, delta, phi in group_vars:
            sub = lam[cols]
            nnz = int(np.count_nonzero(sub))
            x[nu] = float(nnz > 0)
            x[tau] = max(nnz - 1, 0)
            x[delta] = float(np.any(sub > 0))
            x[phi] = feature_cost * x[nu] + rule_cost * x[tau] + eps * float(np.abs(sub).sum())

    ip.add_completer(fill)
    costs = [np.zeros(L.values[0].size)] + [eps * np.abs(L.values[j]) for j in range(1, L.n_coef)]
    return _finish(
        ip,
        rule_dataset,
        L,
        w,
        costs,
        ops,
        margin,
        groups=[cols for cols, *_ in group_vars],
        feature_cost=feature_cost,
        extra_rule_cost=rule_cost,
        max_rules_per_group=max_rules,
        sign_agreement=True,
    )


def build_program(
    dataset: Dataset,
    penalty: PenaltyConfig,
    L: InterpretabilitySet | None = None,
    weights: ClassWeights | None = None,
    ops: OperationalConstraints | None = None,
    margin: float | None = None,
) -> IntegerProgram:
    """Dispatch to the builder named by ``penalty.kind``."""
    kind = penalty.kind
    if kind == "slim":
        if L is None:
            raise FormulationError("SLIM needs a coefficient set")
        return build_slim(dataset, L, penalty.C0, weights, ops, penalty.C0_per_feature, penalty.l1_tiebreak_weight, margin)
    if kind == "pilm":
        levels = penalty.levels or PersonalizedLevels.default()
        iv = L.values[0] if L is not None else tuple(range(-100, 101))
        return build_pilm(dataset, levels, iv, weights, ops, margin)
    if kind == "mofn":
        return build_mofn(dataset, penalty.C0, weights, ops, margin)
    if kind == "tilm":
        if L is None:
            raise FormulationError("TILM needs a coefficient set")
        return build_tilm(
            dataset, L, penalty.feature_cost, penalty.rule_cost, penalty.max_rules, penalty.l1_tiebreak_weight, weights, ops, margin
        )
    raise FormulationError(f"unknown model family {kind!r}")


# ---------------------------------------------------------------------------
# operational constraints


def add_operational_constraints(ip: IntegerProgram, ops: OperationalConstraints, dataset: Dataset) -> IntegerProgram:
    """Append hard constraints to a classifier program (in place).

    Size, either-or, if-then and hierarchy constraints act on the selection
    indicators ``alpha_j``; sign restrictions tighten the coefficient
    variables; false positive/negative rate caps count loss indicators of one
    class; the prediction budget adds an indicator ``z_i`` per positive
    example that is forced to 1 whenever the example is predicted positive.

    Raises
    ------
    FormulationError
        If the program lacks the indicator variables a constraint needs.
    """
    ops.validate(dataset.P)
    if ops.is_empty:
        return ip
    alpha = ip.roles.get("alpha", {})
    psi = ip.roles.get("psi", {})
    if ip.problem is None or ip.coef_vars is None:
        raise FormulationError("operational constraints need a classifier program")

    def a(j: int) -> int | None:
        return alpha.get(j)

    needs_alpha = ops.max_model_size is not None or ops.either_or or ops.if_then or ops.hierarchy
    if needs_alpha and not alpha:
        raise FormulationError("program has no selection indicators for feature constraints")
    if ops.has_rate_constraints and not psi:
        raise FormulationError("rate constraints need per-example loss indicators")

    # signs: tighten coefficient and selector bounds
    L = ip.problem.L
    if ops.signs:
        L = L.with_signs(ops.signs)
        for j, s in ops.signs.items():
            cv = ip.coef_vars[j]
            lo, hi = ip.lb[cv], ip.ub[cv]
            ip.set_bounds(cv, max(lo, 0.0) if s == "nonneg" else lo, min(hi, 0.0) if s == "nonpos" else hi)
            for (jj, v), u in ip.roles.get("select", {}).items():
                if jj == j and ((s == "nonneg" and v < 0) or (s == "nonpos" and v > 0)):
                    ip.set_bounds(u, 0.0, 0.0)

    used = [j for j in range(1, dataset.P + 1) if a(j) is not None]
    if ops.max_model_size is not None:
        ip.add_row("max_model_size", [a(j) for j in used], np.ones(len(used)), hi=float(ops.max_model_size))
    for p, (j, k) in enumerate(ops.either_or):
        idx = [v for v in (a(j), a(k)) if v is not None]
        if idx:
            ip.add_row(f"either_or_{p}", idx, np.ones(len(idx)), hi=1.0)
    for p, (ants, c) in enumerate(ops.if_then):
        ant = [a(j) for j in ants if a(j) is not None]
        if not ant:
            continue
        if a(c) is None:
            # the consequent can never be used, so neither can the antecedents
            ip.add_row(f"if_then_{p}", ant, np.ones(len(ant)), hi=0.0)
        else:
            ip.add_row(f"if_then_{p}", ant + [a(c)], [1.0] * len(ant) + [-float(len(ant))], hi=0.0)
    for p, (leaf, node) in enumerate(ops.hierarchy):
        if a(leaf) is None:
            continue
        if a(node) is None:
            ip.add_row(f"hierarchy_{p}", [a(leaf)], [1.0], hi=0.0)
        else:
            ip.add_row(f"hierarchy_{p}", [a(leaf), a(node)], [1.0, -1.0], hi=0.0)

    y = dataset.y
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == -1)
    if ops.max_fpr is not None:
        ip.add_row("max_fpr", [psi[i] for i in neg], np.ones(neg.size), hi=float(_cap(ops.max_fpr, neg.size)))
    if ops.max_fnr is not None:
        ip.add_row("max_fnr", [psi[i] for i in pos], np.ones(pos.size), hi=float(_cap(ops.max_fnr, pos.size)))
    if ops.prediction_budget is not None:
        assert ip.big_m is not None
        m = ip.big_m.margin
        lo = np.array([ip.lb[v] for v in ip.coef_vars])
        hi = np.array([ip.ub[v] for v in ip.coef_vars])
        Xp = dataset.X[pos]
        Mp = m + np.maximum(Xp * lo, Xp * hi).sum(axis=1)
        z = np.array([ip.add_var(f"z_{i}", "B", 0, 1, role="z", key=int(i), priority=PRIORITY_INDICATOR) for i in pos], dtype=int)
        for r, i in enumerate(pos):
            nz = np.flatnonzero(dataset.X[i])
            ip.add_row(
                f"predict_{i}",
                np.concatenate(([z[r]], ip.coef_vars[nz])),
                np.concatenate(([Mp[r]], -dataset.X[i, nz])),
                lo=m,
            )
        ip.add_row(
            "prediction_budget",
            list(z) + [psi[i] for i in neg],
            np.ones(z.size + neg.size),
            hi=float(_cap(ops.prediction_budget, dataset.N)),
        )
        prop = ip.roles.get("_propagation")
        if prop is not None:
            prop["z"] = z
            prop["Xpos"] = Xp

        def fill(lam, scores, x):
            x[z] = (scores[pos] + m > 1e-12).astype(float)

        ip.add_completer(fill)

    old = ip.problem
    merged = _merge_ops(old.ops, ops)
    ip.problem = DiscreteProblem(
        old.X, old.y, old.w, L,
        [old.costs[j][np.isin(old.L.values[j], L.values[j])] for j in range(L.n_coef)],
        merged,
        groups=old.groups,
        feature_cost=old.feature_cost,
        extra_rule_cost=old.extra_rule_cost,
        max_rules_per_group=old.max_rules_per_group,
        sign_agreement=old.sign_agreement,
        margin=old.margin,
    )
    return ip


def _merge_ops(a: OperationalConstraints, b: OperationalConstraints) -> OperationalConstraints:
    def pick_min(x, y):
        vals = [v for v in (x, y) if v is not None]
        return min(vals) if vals else None

    signs = dict(a.signs)
    for j, s in b.signs.items():
        if signs.get(j, "free") not in ("free", s) and s != "free":
            raise FormulationError(f"conflicting sign restrictions on coefficient {j}")
        if s != "free":
            signs[j] = s
    return OperationalConstraints(
        max_model_size=pick_min(a.max_model_size, b.max_model_size),
        max_fpr=pick_min(a.max_fpr, b.max_fpr),
        max_fnr=pick_min(a.max_fnr, b.max_fnr),
        prediction_budget=pick_min(a.prediction_budget, b.prediction_budget),
        signs=signs,
        either_or=a.either_or + b.either_or,
        if_then=a.if_then + b.if_then,
        hierarchy=a.hierarchy + b.hierarchy,
    )

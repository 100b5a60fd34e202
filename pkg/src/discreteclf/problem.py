"""Direct (encoding-free) description of a discrete classifier training problem.

:class:`DiscreteProblem` evaluates the objective, the penalty and every
operational constraint straight from a coefficient vector.  The exhaustive
oracle, the primal heuristics and post-hoc certification all work on this
representation, independently of the integer-program encoding.

Two loss semantics are supported through the ``margin`` argument:

* ``margin == 0`` is the exact 0-1 loss of the decision rule "predict +1 when
  ``score >= 0``": a positive example is an error when ``score < 0`` and a
  negative one when ``score >= 0``.
* ``margin > 0`` reproduces what the Big-M encoding with margin ``margin``
  counts: positives are still errors when ``score < 0``, negatives when
  ``score > -margin`` (the strict inequality needs a margin in a linear
  program).  A prediction is positive when ``score > -margin``.  On integer
  scores and ``0 < margin <= 1`` both semantics coincide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Any, Mapping, Sequence

import numpy as np

from .coefsets import SIGN_CHOICES, InterpretabilitySet

__all__ = ["OperationalConstraints", "DiscreteProblem", "predict"]


def predict(lam: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Predicted labels: ``+1`` when the score is non-negative, else ``-1``."""
    return np.where(np.asarray(X) @ np.asarray(lam, dtype=float) >= 0, 1, -1)


@dataclass(frozen=True)
class OperationalConstraints:
    """Hard constraints on the coefficients and on the classifier's behaviour.

    Coefficient indices refer to columns of the design matrix (1..P; the
    intercept cannot be constrained).

    Attributes
    ----------
    max_model_size : int, optional
        Upper bound on the number of non-zero non-intercept coefficients.
    max_fpr, max_fnr : float, optional
        Bounds on the false positive / false negative rate on training data.
    prediction_budget : float, optional
        Bound on the fraction of training examples predicted positive.
    signs : mapping of int to str
        ``"nonneg"`` or ``"nonpos"`` per coefficient; others are free.
    either_or : tuple of (int, int)
        Pairs of coefficients that may not both be non-zero.
    if_then : tuple of (tuple of int, int)
        ``(antecedents, consequent)``: using any antecedent forces the
        consequent to be used.
    hierarchy : tuple of (int, int)
        ``(leaf, node)`` edges: the leaf may only be used if the node is.
    """

    max_model_size: int | None = None
    max_fpr: float | None = None
    max_fnr: float | None = None
    prediction_budget: float | None = None
    signs: Mapping[int, str] = field(default_factory=dict)
    either_or: tuple[tuple[int, int], ...] = ()
    if_then: tuple[tuple[tuple[int, ...], int], ...] = ()
    hierarchy: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "signs", {int(k): v for k, v in dict(self.signs).items()})
        object.__setattr__(self, "either_or", tuple((int(a), int(b)) for a, b in self.either_or))
        object.__setattr__(
            self, "if_then", tuple((tuple(int(a) for a in ants), int(c)) for ants, c in self.if_then)
        )
        object.__setattr__(self, "hierarchy", tuple((int(a), int(b)) for a, b in self.hierarchy))
        for name in ("max_fpr", "max_fnr", "prediction_budget"):
            v = getattr(self, name)
            if v is not None and not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.max_model_size is not None and self.max_model_size < 0:
            raise ValueError("max_model_size must be non-negative")
        for s in self.signs.values():
            if s not in SIGN_CHOICES:
                raise ValueError(f"unknown sign restriction {s!r}")

    def validate(self, P: int) -> None:
        """Check that every referenced coefficient index lies in ``1..P``."""
        idx = list(self.signs)
        idx += [a for pair in self.either_or for a in pair]
        idx += [a for ants, c in self.if_then for a in (*ants, c)]
        idx += [a for pair in self.hierarchy for a in pair]
        for j in idx:
            if not (1 <= j <= P):
                raise ValueError(f"operational constraint references invalid coefficient {j}")

    @property
    def has_rate_constraints(self) -> bool:
        return self.max_fpr is not None or self.max_fnr is not None or self.prediction_budget is not None

    @property
    def is_empty(self) -> bool:
        return self == OperationalConstraints()

    def to_dict(self) -> dict:
        out: dict[str, Any] = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "signs":
                v = {str(k): s for k, s in v.items()}
            elif f.name == "if_then":
                v = [[list(a), c] for a, c in v]
            elif isinstance(v, tuple):
                v = [list(p) for p in v]
            out[f.name] = v
        return out

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "OperationalConstraints":
        d = dict(d)
        if "signs" in d:
            d["signs"] = {int(k): v for k, v in d["signs"].items()}
        if "if_then" in d:
            d["if_then"] = tuple((tuple(a), c) for a, c in d["if_then"])
        for k in ("either_or", "hierarchy"):
            if k in d:
                d[k] = tuple(tuple(p) for p in d[k])
        return cls(**d)


def _cap(fraction: float, count: int) -> int:
    """Largest integer count allowed by a rate bound."""
    return int(math.floor(fraction * count + 1e-9))


class DiscreteProblem:
    """Weighted 0-1 loss plus penalty over a finite coefficient set.

    Parameters
    ----------
    X : numpy.ndarray
        Design matrix with intercept column, shape ``(N, n_coef)``.
    y : numpy.ndarray
        Labels in ``{-1, +1}``.
    sample_weight : numpy.ndarray
        Non-negative weight of each example's error; the loss is
        ``sum_i sample_weight[i] * error_i``.
    L : InterpretabilitySet
        Admissible values (already restricted by sign constraints).
    costs : sequence of numpy.ndarray
        ``costs[j][k]`` is the penalty for setting coefficient j to
        ``L[j][k]``.
    ops : OperationalConstraints
        Constraints checked by :meth:`feasible`.
    groups : sequence of sequence of int, optional
        Coefficient groups (rules from one parent feature).  When given,
        ``feature_cost`` is charged once per used group, ``extra_rule_cost``
        for every further rule in it; at most ``max_rules_per_group`` rules may be
        used and, if ``sign_agreement``, their signs must agree.
    margin : float
        Margin of the Big-M encoding this problem mirrors.
    """

    def __init__(
        self,
        X: np.ndarray,
        y: np.ndarray,
        sample_weight: np.ndarray,
        L: InterpretabilitySet,
        costs: Sequence[np.ndarray],
        ops: OperationalConstraints | None = None,
        groups: Sequence[Sequence[int]] | None = None,
        feature_cost: float = 0.0,
        extra_rule_cost: float = 0.0,
        max_rules_per_group: int | None = None,
        sign_agreement: bool = False,
        margin: float = 0.0,
    ):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=int)
        self.w = np.asarray(sample_weight, dtype=float)
        self.L = L
        self.costs = tuple(np.asarray(c, dtype=float) for c in costs)
        if len(self.costs) != L.n_coef or any(c.shape != v.shape for c, v in zip(self.costs, L.values)):
            raise ValueError("costs must align with the value sets")
        if self.X.shape[1] != L.n_coef:
            raise ValueError("value sets must have one entry per column of X")
        self.ops = ops or OperationalConstraints()
        self.ops.validate(L.n_coef - 1)
        self.groups = tuple(tuple(int(j) for j in g) for g in (groups or ()))
        self.feature_cost = float(feature_cost)
        self.extra_rule_cost = float(extra_rule_cost)
        self.max_rules_per_group = max_rules_per_group
        self.sign_agreement = sign_agreement
        self.margin = float(margin)
        self.pos = self.y == 1
        self.neg = ~self.pos
        self.n_pos = int(self.pos.sum())
        self.n_neg = int(self.neg.sum())

    @property
    def n_coef(self) -> int:
        return self.L.n_coef

    @property
    def N(self) -> int:
        return self.X.shape[0]

    # -- building blocks ----------------------------------------------

    def scores(self, Lam: np.ndarray) -> np.ndarray:
        Lam = np.atleast_2d(np.asarray(Lam, dtype=float))
        return Lam @ self.X.T

    def _margin(self, margin: float | None) -> float:
        return self.margin if margin is None else float(margin)

    def errors(self, S: np.ndarray, margin: float | None = None) -> np.ndarray:
        """Error indicators for score matrix ``S`` of shape ``(K, N)``."""
        S = np.atleast_2d(S)
        return np.where(self.pos, S < 0, self.predicted_positive(S, margin))

    def predicted_positive(self, S: np.ndarray, margin: float | None = None) -> np.ndarray:
        m = self._margin(margin)
        return S >= 0 if m == 0 else S > -m

    def loss_from_scores(self, S: np.ndarray, margin: float | None = None) -> np.ndarray:
        return self.errors(S, margin).astype(float) @ self.w

    def loss(self, Lam: np.ndarray, margin: float | None = None) -> np.ndarray:
        return self.loss_from_scores(self.scores(Lam), margin)

    def coordinate_costs(self, Lam: np.ndarray) -> np.ndarray:
        """Per-coordinate penalty terms, shape ``(K, n_coef)``."""
        Lam = np.atleast_2d(np.asarray(Lam, dtype=float))
        out = np.empty_like(Lam)
        for j in range(self.n_coef):
            vals = self.L.values[j]
            k = np.clip(np.searchsorted(vals, Lam[:, j] - 1e-9), 0, vals.size - 1)
            out[:, j] = self.costs[j][k]
        return out

    def group_costs(self, Lam: np.ndarray) -> np.ndarray:
        Lam = np.atleast_2d(np.asarray(Lam, dtype=float))
        total = np.zeros(Lam.shape[0])
        for g in self.groups:
            nnz = np.count_nonzero(Lam[:, list(g)], axis=1)
            total += self.feature_cost * (nnz > 0) + self.extra_rule_cost * np.maximum(nnz - 1, 0)
        return total

    def penalty(self, Lam: np.ndarray) -> np.ndarray:
        return self.coordinate_costs(Lam).sum(axis=1) + self.group_costs(Lam)

    def objective(self, Lam: np.ndarray, margin: float | None = None) -> np.ndarray:
        return self.loss(Lam, margin) + self.penalty(Lam)

    def model_size(self, Lam: np.ndarray) -> np.ndarray:
        Lam = np.atleast_2d(np.asarray(Lam, dtype=float))
        return np.count_nonzero(Lam[:, 1:], axis=1)

    # -- constraints ---------------------------------------------------

    def structure_feasible(self, Lam: np.ndarray) -> np.ndarray:
        """Constraints that depend only on which coefficients are used."""
        Lam = np.atleast_2d(np.asarray(Lam, dtype=float))
        used = Lam != 0
        ok = np.ones(Lam.shape[0], dtype=bool)
        ops = self.ops
        if ops.max_model_size is not None:
            ok &= used[:, 1:].sum(axis=1) <= ops.max_model_size
        for a, b in ops.either_or:
            ok &= ~(used[:, a] & used[:, b])
        for ants, c in ops.if_then:
            ok &= ~(used[:, list(ants)].any(axis=1) & ~used[:, c])
        for leaf, node in ops.hierarchy:
            ok &= ~(used[:, leaf] & ~used[:, node])
        for g in self.groups:
            sub = Lam[:, list(g)]
            if self.max_rules_per_group is not None:
                ok &= np.count_nonzero(sub, axis=1) <= self.max_rules_per_group
            if self.sign_agreement:
                ok &= ~((sub > 0).any(axis=1) & (sub < 0).any(axis=1))
        return ok

    def rate_feasible_from_scores(self, S: np.ndarray, margin: float | None = None) -> np.ndarray:
        ops = self.ops
        ok = np.ones(S.shape[0], dtype=bool)
        if not ops.has_rate_constraints:
            return ok
        err = self.errors(S, margin)
        if ops.max_fpr is not None:
            ok &= err[:, self.neg].sum(axis=1) <= _cap(ops.max_fpr, self.n_neg)
        if ops.max_fnr is not None:
            ok &= err[:, self.pos].sum(axis=1) <= _cap(ops.max_fnr, self.n_pos)
        if ops.prediction_budget is not None:
            pp = self.predicted_positive(S, margin)
            ok &= pp.sum(axis=1) <= _cap(ops.prediction_budget, self.N)
        return ok

    def feasible(self, Lam: np.ndarray, margin: float | None = None) -> np.ndarray:
        Lam = np.atleast_2d(np.asarray(Lam, dtype=float))
        ok = self.structure_feasible(Lam)
        if self.ops.has_rate_constraints:
            ok &= self.rate_feasible_from_scores(self.scores(Lam), margin)
        return ok

    def violated_constraints(self, lam: np.ndarray, margin: float | None = None) -> list[str]:
        """Names of the constraints a single coefficient vector violates."""
        lam = np.asarray(lam, dtype=float)
        out = []
        if not self.L.contains(lam):
            out.append("value-set")
        used = lam != 0
        ops = self.ops
        if ops.max_model_size is not None and used[1:].sum() > ops.max_model_size:
            out.append("max_model_size")
        for a, b in ops.either_or:
            if used[a] and used[b]:
                out.append(f"either_or({a},{b})")
        for ants, c in ops.if_then:
            if used[list(ants)].any() and not used[c]:
                out.append(f"if_then({list(ants)}->{c})")
        for leaf, node in ops.hierarchy:
            if used[leaf] and not used[node]:
                out.append(f"hierarchy({leaf}->{node})")
        for g in self.groups:
            sub = lam[list(g)]
            if self.max_rules_per_group is not None and np.count_nonzero(sub) > self.max_rules_per_group:
                out.append(f"max_rules_per_group{list(g)}")
            if self.sign_agreement and (sub > 0).any() and (sub < 0).any():
                out.append(f"sign_agreement{list(g)}")
        if ops.has_rate_constraints:
            S = self.scores(lam)
            err = self.errors(S, margin)[0]
            if ops.max_fpr is not None and err[self.neg].sum() > _cap(ops.max_fpr, self.n_neg):
                out.append("max_fpr")
            if ops.max_fnr is not None and err[self.pos].sum() > _cap(ops.max_fnr, self.n_pos):
                out.append("max_fnr")
            if ops.prediction_budget is not None:
                if self.predicted_positive(S, margin)[0].sum() > _cap(ops.prediction_budget, self.N):
                    out.append("prediction_budget")
        return out

    # -- intercept re-optimization -------------------------------------

    def best_intercepts(self, S_wo: np.ndarray, margin: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Exact best intercept for each row of intercept-free scores.

        Parameters
        ----------
        S_wo : numpy.ndarray
            Scores without the intercept contribution, shape ``(K, N)``.

        Returns
        -------
        (values, objectives)
            For each row the best intercept in ``L_0`` and the resulting
            ``loss + cost_0(intercept)``.  Rows where no intercept satisfies the
            rate constraints get ``inf``.
        """
        m = self._margin(margin)
        b = self.L.values[0]
        c0 = self.costs[0]
        K = S_wo.shape[0]
        best_v = np.zeros(K)
        best_f = np.full(K, np.inf)
        wp, wn = self.w[self.pos], self.w[self.neg]
        ops = self.ops
        for r in range(K):
            s = S_wo[r]
            sp, sn = s[self.pos], s[self.neg]
            # positives err when b < -s, under either semantics
            tp = -sp
            order = np.argsort(tp, kind="stable")
            tp_sorted = tp[order]
            cw = np.concatenate(([0.0], np.cumsum(wp[order])))
            kp = np.searchsorted(tp_sorted, b, side="right")
            loss_p = cw[-1] - cw[kp]
            # negatives err when b > -m - s (margin) or b >= -s (exact)
            tn = (-m - sn) if m > 0 else -sn
            order_n = np.argsort(tn, kind="stable")
            tn_sorted = tn[order_n]
            cwn = np.concatenate(([0.0], np.cumsum(wn[order_n])))
            side_n = "left" if m > 0 else "right"
            kn = np.searchsorted(tn_sorted, b, side=side_n)
            loss_n = cwn[kn]
            f = loss_p + loss_n + c0
            if ops.has_rate_constraints:
                ok = np.ones(b.size, dtype=bool)
                n_fp = kn  # negatives in error are exactly those predicted positive
                if ops.max_fpr is not None:
                    ok &= n_fp <= _cap(ops.max_fpr, self.n_neg)
                if ops.max_fnr is not None:
                    ok &= (tp.size - kp) <= _cap(ops.max_fnr, self.n_pos)
                if ops.prediction_budget is not None:
                    tpp = np.sort((-m - sp) if m > 0 else -sp)
                    n_tp = np.searchsorted(tpp, b, side=side_n)
                    ok &= (n_tp + n_fp) <= _cap(ops.prediction_budget, self.N)
                f = np.where(ok, f, np.inf)
            k = int(np.argmin(f))
            best_v[r] = b[k]
            best_f[r] = f[k]
        return best_v, best_f

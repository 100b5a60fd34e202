"""Trained classifiers: evaluation, persistence and human-readable rendering."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .data import BinaryRuleSet, ClassWeights, Dataset

__all__ = [
    "FAMILIES",
    "RENDER_FORMATS",
    "TrainedModel",
    "classification_metrics",
    "render",
]

FAMILIES = ("slim", "pilm", "mofn", "tilm")
RENDER_FORMATS = ("scoring-table", "mofn-table", "score-function", "machine-readable")


def _num(v: float) -> float | int:
    """Integers as ints (for clean JSON and text), other values unchanged."""
    f = float(v)
    return int(f) if f.is_integer() else f


def _fmt(v: float) -> str:
    return f"{_num(v)}" if float(v).is_integer() else f"{float(v):.6g}"


def classification_metrics(
    coefficients: np.ndarray, X: np.ndarray, y: np.ndarray, weights: ClassWeights | None = None
) -> dict[str, float]:
    """Error, weighted error, true positive rate and false positive rate.

    Predictions use the rule ``score >= 0`` gives ``+1``.  The weighted error
    weights each example by its class weight and normalizes by the total
    weight; with equal class weights it equals the plain error.
    """
    coefficients = np.asarray(coefficients, dtype=float)
    yhat = np.where(X @ coefficients >= 0, 1, -1)
    y = np.asarray(y)
    wrong = yhat != y
    pos, neg = y == 1, y == -1
    w = (weights or ClassWeights(0.5, 0.5)).per_example(y)
    return {
        "n": int(y.size),
        "error": float(wrong.mean()) if y.size else math.nan,
        "weighted_error": float((w * wrong).sum() / w.sum()) if y.size else math.nan,
        "tpr": float((yhat[pos] == 1).mean()) if pos.any() else math.nan,
        "fpr": float((yhat[neg] == 1).mean()) if neg.any() else math.nan,
    }


@dataclass
class TrainedModel:
    """A fitted classifier together with everything needed to apply it to raw data.

    Attributes
    ----------
    family : str
        Model family, one of ``FAMILIES``.
    feature_names : tuple of str
        Names of the model's input columns (rules for rule-based models).
    coefficients : numpy.ndarray
        Coefficients, intercept first.
    raw_feature_names : tuple of str
        Columns expected in raw data passed to :meth:`predict`.
    rule_set : BinaryRuleSet, optional
        Maps raw data onto rule columns.
    scaling : dict
        ``name -> (offset, scale)`` applied as ``(x - offset) / scale`` to raw
        columns before rules and scores.
    positive_label, negative_label : str
        Display names of the two classes.
    metrics : dict
        Training metrics recomputed from the coefficients.
    solve : dict
        Solver status, objective, bound and gap.
    config : dict
        Resolved training settings.
    """

    family: str
    feature_names: tuple[str, ...]
    coefficients: np.ndarray
    raw_feature_names: tuple[str, ...] = ()
    rule_set: BinaryRuleSet | None = None
    scaling: dict[str, tuple[float, float]] = field(default_factory=dict)
    positive_label: str = "+1"
    negative_label: str = "-1"
    metrics: dict[str, Any] = field(default_factory=dict)
    solve: dict[str, Any] = field(default_factory=dict)
    config: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}")
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        self.feature_names = tuple(self.feature_names)
        self.raw_feature_names = tuple(self.raw_feature_names) or self.feature_names
        if self.coefficients.shape != (len(self.feature_names) + 1,):
            raise ValueError("need one coefficient per feature plus the intercept")

    # -- structure -------------------------------------------------------

    @property
    def intercept(self) -> float:
        return float(self.coefficients[0])

    @property
    def model_size(self) -> int:
        """Number of non-zero non-intercept coefficients."""
        return int(np.count_nonzero(self.coefficients[1:]))

    def terms(self) -> list[tuple[str, float]]:
        """Non-zero ``(feature, coefficient)`` pairs in column order."""
        return [(n, float(c)) for n, c in zip(self.feature_names, self.coefficients[1:]) if c != 0]

    # -- application -----------------------------------------------------

    def design_matrix(self, raw: Dataset) -> np.ndarray:
        """Model input columns (intercept first) for a raw dataset."""
        ds = self._scaled(raw)
        if self.rule_set is not None:
            ds = self.rule_set.apply(ds)
            return ds.X
        idx = {n: j + 1 for j, n in enumerate(ds.feature_names)}
        missing = [n for n in self.feature_names if n not in idx]
        if missing:
            raise ValueError(f"data lacks model features {missing}")
        return np.column_stack([np.ones(ds.N)] + [ds.X[:, idx[n]] for n in self.feature_names])

    def _scaled(self, raw: Dataset) -> Dataset:
        if not self.scaling:
            return raw
        X = raw.X.copy()
        for j, n in enumerate(raw.feature_names, start=1):
            if n in self.scaling:
                off, sc = self.scaling[n]
                X[:, j] = (X[:, j] - off) / sc
        kinds = tuple("real" if n in self.scaling else k for n, k in zip(raw.feature_names, raw.kinds))
        return Dataset(X, raw.y, raw.feature_names, kinds, dict(raw.categories), raw.loss_denominator, raw.rule_set)

    def scores(self, raw: Dataset) -> np.ndarray:
        return self.design_matrix(raw) @ self.coefficients

    def predict(self, raw: Dataset) -> np.ndarray:
        """Labels in ``{-1, +1}``; a score of exactly 0 predicts ``+1``."""
        return np.where(self.scores(raw) >= 0, 1, -1)

    def evaluate(self, raw: Dataset, weights: ClassWeights | None = None) -> dict[str, float]:
        return classification_metrics(self.coefficients, self.design_matrix(raw), raw.y, weights)

    # -- persistence -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "feature_names": list(self.feature_names),
            "raw_feature_names": list(self.raw_feature_names),
            "coefficients": [_num(c) for c in self.coefficients],
            "model_size": self.model_size,
            "rule_set": None if self.rule_set is None else self.rule_set.to_dict(),
            "scaling": {k: [float(a), float(b)] for k, (a, b) in sorted(self.scaling.items())},
            "positive_label": self.positive_label,
            "negative_label": self.negative_label,
            "metrics": _jsonable(self.metrics),
            "solve": _jsonable(self.solve),
            "config": _jsonable(self.config),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "TrainedModel":
        rs = d.get("rule_set")
        return cls(
            family=d["family"],
            feature_names=tuple(d["feature_names"]),
            coefficients=np.asarray(d["coefficients"], dtype=float),
            raw_feature_names=tuple(d.get("raw_feature_names") or d["feature_names"]),
            rule_set=None if rs is None else BinaryRuleSet.from_dict(rs),
            scaling={k: (float(a), float(b)) for k, (a, b) in d.get("scaling", {}).items()},
            positive_label=d.get("positive_label", "+1"),
            negative_label=d.get("negative_label", "-1"),
            metrics=dict(d.get("metrics", {})),
            solve=dict(d.get("solve", {})),
            config=dict(d.get("config", {})),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "TrainedModel":
        return cls.from_dict(json.loads(text))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "TrainedModel":
        return cls.from_json(Path(path).read_text())

    def __eq__(self, other: object) -> bool:
        return isinstance(other, TrainedModel) and self.to_json() == other.to_json()


def _jsonable(v: Any) -> Any:
    if isinstance(v, Mapping):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        f = float(v)
        if math.isnan(f):
            return None
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return v


# ---------------------------------------------------------------------------
# rendering


def _scaling_notes(model: TrainedModel) -> list[str]:
    used = {n for n, _ in model.terms()}
    if model.rule_set is not None:
        used = {r.parent for r, c in zip(model.rule_set.rules, model.coefficients[1:]) if c != 0}
    return [
        f"note: {n} enters as ({n} - {off:.6g}) / {sc:.6g}"
        for n, (off, sc) in sorted(model.scaling.items())
        if n in used
    ]


def _constant_text(model: TrainedModel) -> str:
    b = model.intercept
    label = model.positive_label if b >= 0 else model.negative_label
    return (
        f"PREDICT {label} FOR EVERY EXAMPLE\n"
        f"(no features are used; the score is the constant {_fmt(b)} and a score >= 0 predicts {model.positive_label})\n"
    )


def _scoring_table(model: TrainedModel) -> str:
    terms = model.terms()
    if not terms:
        return _constant_text(model)
    threshold = -model.intercept
    name_w = max(len(n) for n, _ in terms)
    rows = []
    for k, (n, c) in enumerate(terms, start=1):
        unit = "point" if abs(c) == 1 else "points"
        rows.append(f"{k:>2}. {n:<{name_w}}  × {_fmt(c):>4} {unit:<6} | + ......")
    foot = f"ADD POINTS FROM ROWS 1 TO {len(terms)}"
    tail = "SCORE | = ......"
    width = max(max(len(r) for r in rows), len(foot) + 1 + len(tail))
    head = f"PREDICT {model.positive_label} IF SCORE >= {_fmt(threshold)}"
    foot = f"{foot:<{width - len(tail)}}{tail}"
    lines = [head, "=" * width, *rows, "=" * width, foot]
    lines += _scaling_notes(model)
    lines.append(f"(a score below {_fmt(threshold)} predicts {model.negative_label})")
    return "\n".join(lines) + "\n"


def _rule_parts(model: TrainedModel) -> list[str]:
    """Selected rule descriptions, with same-feature category indicators merged."""
    selected = [j for j in range(1, model.coefficients.size) if model.coefficients[j] != 0]
    if model.rule_set is None:
        return [model.feature_names[j - 1] for j in selected]
    merged: dict[str, list] = {}
    order: list[tuple[str, Any]] = []
    for j in selected:
        rule = model.rule_set.rules[j - 1]
        if rule.op == "==":
            if rule.parent not in merged:
                merged[rule.parent] = []
                order.append(("set", rule.parent))
            merged[rule.parent].append(rule.value)
        else:
            order.append(("rule", rule))
    parts = []
    for kind, item in order:
        if kind == "set":
            vals = merged[item]
            if len(vals) == 1:
                parts.append(f"{item} = {vals[0]}")
            else:
                parts.append(f"{item} ∈ {{{', '.join(str(v) for v in vals)}}}")
        else:
            parts.append(_rule_text(item))
    return parts


def _rule_text(rule) -> str:
    v = rule.value
    if isinstance(v, float):
        v = _fmt(v)
    if rule.op == "is":
        return rule.parent
    if rule.op == "not":
        return f"not {rule.parent}"
    if rule.op == "!=":
        return f"{rule.parent} ≠ {v}"
    return f"{rule.parent} {rule.op} {v}"


def _mofn_table(model: TrainedModel) -> str:
    c = model.coefficients[1:]
    nz = c[c != 0]
    if nz.size == 0:
        return _constant_text(model)
    if not np.all(nz == 1):
        raise ValueError("an M-of-N table needs every selected rule to carry coefficient 1")
    # category indicators of one feature are mutually exclusive, so merging them keeps the count exact
    parts = _rule_parts(model)
    M = int(math.ceil(-model.intercept - 1e-12))
    head = f"PREDICT {model.positive_label} IF AT LEAST {M} OF THE FOLLOWING {len(parts)} RULES ARE TRUE"
    lines = [head, *[f"{k:>2}. {p}" for k, p in enumerate(parts, start=1)]]
    lines += _scaling_notes(model)
    lines.append(f"(otherwise predict {model.negative_label})")
    return "\n".join(lines) + "\n"


def _score_function(model: TrainedModel) -> str:
    pieces = [_fmt(model.intercept)]
    for n, c in model.terms():
        sign = "-" if c < 0 else "+"
        pieces.append(f"{sign} {_fmt(abs(c))}·{n}")
    lines = [f"score = {' '.join(pieces)}", f"predict {model.positive_label} if score >= 0, else {model.negative_label}"]
    lines += _scaling_notes(model)
    return "\n".join(lines) + "\n"


def render(model: TrainedModel, fmt: str = "scoring-table") -> str:
    """Render a model as text.

    Parameters
    ----------
    model : TrainedModel
        The model.
    fmt : str
        ``"scoring-table"`` (points per feature and a threshold),
        ``"mofn-table"`` (count of true rules), ``"score-function"`` (one-line
        formula) or ``"machine-readable"`` (JSON that :meth:`TrainedModel.from_json`
        reads back).
    """
    if fmt == "scoring-table":
        return _scoring_table(model)
    if fmt == "mofn-table":
        return _mofn_table(model)
    if fmt == "score-function":
        return _score_function(model)
    if fmt == "machine-readable":
        return model.to_json()
    raise ValueError(f"unknown format {fmt!r}; choose from {RENDER_FORMATS}")

"""Datasets, binary-rule expansion and class weights.

Every design matrix in this package carries a constant intercept column at
index 0, so a coefficient vector of length ``P + 1`` scores an example with a
single dot product.  Labels are always coded as ``-1`` / ``+1``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import yaml

__all__ = [
    "DataError",
    "Example",
    "Dataset",
    "ClassWeights",
    "RuleSpec",
    "RuleGroup",
    "BinaryRuleSet",
    "FEATURE_KINDS",
    "load_schema",
    "load_dataset",
    "dataset_from_arrays",
    "binarize",
    "make_weights",
]

FEATURE_KINDS = ("binary", "categorical", "real")
INTERCEPT_NAME = "(Intercept)"


class DataError(ValueError):
    """Raised when input data or a data transformation is invalid."""


@dataclass(frozen=True)
class Example:
    """A single labelled example.

    Attributes
    ----------
    features : numpy.ndarray
        Feature vector of length ``P + 1`` whose first entry is the constant 1.
    label : int
        Either ``-1`` or ``+1``.
    """

    features: np.ndarray
    label: int


@dataclass(frozen=True)
class RuleSpec:
    """Description of one binary rule column.

    Attributes
    ----------
    parent : str
        Name of the original feature the rule was derived from.
    provenance : str
        One of ``"binary-passthrough"``, ``"category-indicator"`` or
        ``"threshold"``.
    op : str
        Comparison operator: ``">="``, ``"<"``, ``"=="``, ``"!="``, ``"is"`` or
        ``"not"``.  The last two are used for passthrough binary features.
    value : Any
        Threshold (real features) or category label (categorical features).
    complement : bool
        True when the rule is ``1 - h`` for another rule ``h`` in the set.
    """

    parent: str
    provenance: str
    op: str
    value: Any = None
    complement: bool = False

    @property
    def name(self) -> str:
        if self.op == "is":
            return self.parent
        if self.op == "not":
            return f"not {self.parent}"
        value = self.value
        if isinstance(value, float):
            value = f"{value:g}"
        return f"{self.parent}{self.op}{value}"

    def to_dict(self) -> dict:
        value = self.value
        if isinstance(value, (np.floating, np.integer)):
            value = value.item()
        return {
            "parent": self.parent,
            "provenance": self.provenance,
            "op": self.op,
            "value": value,
            "complement": self.complement,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "RuleSpec":
        return cls(d["parent"], d["provenance"], d["op"], d.get("value"), bool(d.get("complement", False)))


@dataclass(frozen=True)
class RuleGroup:
    """The rules generated from a single original feature.

    Attributes
    ----------
    parent : str
        Original feature name.
    provenance : str
        How the rules were produced.
    columns : tuple of int
        Column indices (1-based, intercept excluded) of the rules in the rule
        dataset.
    thresholds : tuple of float
        Thresholds ``v_{j,t}`` for real features; empty otherwise.
    """

    parent: str
    provenance: str
    columns: tuple[int, ...]
    thresholds: tuple[float, ...] = ()

    @property
    def size(self) -> int:
        return len(self.columns)


@dataclass(frozen=True)
class BinaryRuleSet:
    """Bookkeeping produced by :func:`binarize`.

    Attributes
    ----------
    groups : tuple of RuleGroup
        One group per original feature, in the original feature order.
    rules : tuple of RuleSpec
        One entry per rule column, aligned with the rule dataset columns
        ``1..P_rules``.
    """

    groups: tuple[RuleGroup, ...]
    rules: tuple[RuleSpec, ...]

    def rule_counts(self) -> dict[str, int]:
        """Number of rules ``T_j`` generated for each original feature."""
        return {g.parent: g.size for g in self.groups}

    def apply(self, dataset: "Dataset") -> "Dataset":
        """Evaluate the rules on another dataset with the same raw schema.

        This is how held-out folds are mapped onto the rules learned from a
        training split.
        """
        name_to_col = {name: j + 1 for j, name in enumerate(dataset.feature_names)}
        cols = []
        for rule in self.rules:
            if rule.parent not in name_to_col:
                raise DataError(f"feature {rule.parent!r} missing from dataset")
            j = name_to_col[rule.parent]
            x = dataset.X[:, j]
            if rule.op == "value":
                cols.append(x.copy())
                continue
            if rule.op in ("==", "!="):
                cats = dataset.categories.get(j, ())
                code = cats.index(rule.value) if rule.value in cats else -1
                h = x == code
            elif rule.op in (">=", "<"):
                h = x >= rule.value
            else:
                h = x != 0
            if rule.op in ("!=", "<", "not"):
                h = ~h
            cols.append(h.astype(float))
        Z = np.column_stack([np.ones(dataset.N)] + cols) if cols else np.ones((dataset.N, 1))
        return Dataset(
            X=Z,
            y=dataset.y.copy(),
            feature_names=tuple(r.parent if r.op == "value" else r.name for r in self.rules),
            kinds=tuple("real" if r.op == "value" else "binary" for r in self.rules),
            rule_set=self,
        )

    def to_dict(self) -> dict:
        return {
            "groups": [
                {
                    "parent": g.parent,
                    "provenance": g.provenance,
                    "columns": list(g.columns),
                    "thresholds": [float(t) for t in g.thresholds],
                }
                for g in self.groups
            ],
            "rules": [r.to_dict() for r in self.rules],
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "BinaryRuleSet":
        groups = tuple(
            RuleGroup(g["parent"], g["provenance"], tuple(g["columns"]), tuple(g.get("thresholds", ())))
            for g in d["groups"]
        )
        return cls(groups, tuple(RuleSpec.from_dict(r) for r in d["rules"]))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labelled training data with an explicit intercept column.

    Parameters
    ----------
    X : numpy.ndarray
        Array of shape ``(N, P + 1)``; column 0 must be all ones.
    y : numpy.ndarray
        Labels in ``{-1, +1}`` of shape ``(N,)``.
    feature_names : tuple of str
        Names of the ``P`` non-intercept features.
    kinds : tuple of str
        Kind of each non-intercept feature (see ``FEATURE_KINDS``).
    categories : dict
        For categorical features, maps the column index to the tuple of
        category labels; the column stores integer codes into that tuple.
    loss_denominator : int, optional
        Number of examples used to normalize the loss.  Defaults to ``N``.
        Reduced datasets keep the size of the data they were filtered from so
        that objective values remain comparable.
    rule_set : BinaryRuleSet, optional
        Present when the columns are binary rules produced by :func:`binarize`.
    """

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    kinds: tuple[str, ...]
    categories: dict[int, tuple] = field(default_factory=dict)
    loss_denominator: int | None = None
    rule_set: BinaryRuleSet | None = None

    def __post_init__(self) -> None:
        X = np.ascontiguousarray(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y)
        if X.ndim != 2 or X.shape[1] < 1:
            raise DataError("X must be a 2-d array with an intercept column")
        if X.shape[0] == 0:
            raise DataError("dataset is empty")
        if y.shape != (X.shape[0],):
            raise DataError("y must have one label per row of X")
        if not np.all(X[:, 0] == 1.0):
            raise DataError("column 0 of X must be the constant 1")
        if not np.all(np.isin(y, (-1, 1))):
            raise DataError("labels must be -1 or +1")
        if not np.all(np.isfinite(X)):
            raise DataError("X contains non-finite values")
        P = X.shape[1] - 1
        if len(self.feature_names) != P or len(self.kinds) != P:
            raise DataError("feature_names and kinds must have one entry per non-intercept column")
        for k in self.kinds:
            if k not in FEATURE_KINDS:
                raise DataError(f"unknown feature kind {k!r}")
        X.setflags(write=False)
        y = y.astype(int)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "kinds", tuple(self.kinds))

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def P(self) -> int:
        return self.X.shape[1] - 1

    @property
    def denominator(self) -> int:
        """Number of examples that normalizes the loss."""
        return self.N if self.loss_denominator is None else int(self.loss_denominator)

    @property
    def positive_index_set(self) -> np.ndarray:
        return np.flatnonzero(self.y == 1)

    @property
    def negative_index_set(self) -> np.ndarray:
        return np.flatnonzero(self.y == -1)

    @property
    def n_pos(self) -> int:
        return int(np.sum(self.y == 1))

    @property
    def n_neg(self) -> int:
        return int(np.sum(self.y == -1))

    @property
    def names_with_intercept(self) -> tuple[str, ...]:
        return (INTERCEPT_NAME,) + self.feature_names

    @property
    def examples(self) -> list[Example]:
        return [Example(self.X[i], int(self.y[i])) for i in range(self.N)]

    def is_integer_valued(self) -> bool:
        """True when every feature value is an integer."""
        return bool(np.all(self.X == np.round(self.X)))

    def is_binary(self) -> bool:
        """True when every non-intercept column only contains 0 and 1."""
        return bool(np.all((self.X[:, 1:] == 0) | (self.X[:, 1:] == 1)))

    def subset(self, index: Iterable[int], keep_denominator: bool = False) -> "Dataset":
        """Return the examples at ``index``.

        Parameters
        ----------
        index : iterable of int
            Row indices to keep (0-based).
        keep_denominator : bool, default False
            Keep the current loss denominator instead of resetting it to the
            size of the subset.
        """
        idx = np.asarray(list(index), dtype=int)
        if idx.size == 0:
            raise DataError("subset is empty")
        return replace(
            self,
            X=self.X[idx],
            y=self.y[idx],
            loss_denominator=self.denominator if keep_denominator else None,
        )


@dataclass(frozen=True)
class ClassWeights:
    """Relative weights of positive and negative errors (summing to one)."""

    w_plus: float
    w_minus: float

    def __post_init__(self) -> None:
        if not (0.0 < self.w_plus < 1.0 and 0.0 < self.w_minus < 1.0):
            raise DataError("class weights must lie strictly between 0 and 1")
        if abs(self.w_plus + self.w_minus - 1.0) > 1e-12:
            raise DataError("class weights must sum to 1")

    def per_example(self, y: np.ndarray) -> np.ndarray:
        """Weights ``2 * W_{y_i}`` so that equal class weights give plain error counts."""
        return np.where(np.asarray(y) == 1, 2.0 * self.w_plus, 2.0 * self.w_minus)


def make_weights(dataset: Dataset, mode: str = "unweighted", w_plus: float | None = None) -> ClassWeights:
    """Construct class weights.

    Parameters
    ----------
    dataset : Dataset
        Training data; only the class counts are used.
    mode : {"unweighted", "balanced", "all-negatives-correct", "all-positives-correct", "explicit"}
        ``balanced`` gives ``(N-/N, N+/N)``.  The two ``all-*-correct`` modes
        pick weights extreme enough that the optimal classifier sacrifices
        every example of the other class before misclassifying one of the
        protected class.
    w_plus : float, optional
        Positive-class weight for ``mode="explicit"``.

    Returns
    -------
    ClassWeights
    """
    n_pos, n_neg = dataset.n_pos, dataset.n_neg
    if mode == "unweighted":
        return ClassWeights(0.5, 0.5)
    if mode == "explicit":
        if w_plus is None or not (0.0 < w_plus < 1.0):
            raise DataError("explicit w_plus must lie in (0, 1)")
        return ClassWeights(float(w_plus), 1.0 - float(w_plus))
    if n_pos < 1 or n_neg < 1:
        raise DataError(f"mode {mode!r} needs at least one example of each class")
    if mode == "balanced":
        wp = n_neg / (n_pos + n_neg)
    elif mode == "all-negatives-correct":
        wp = 0.5 / (1.0 + n_pos)
    elif mode == "all-positives-correct":
        floor = n_neg / (1.0 + n_neg)
        wp = floor + 0.5 * (1.0 - floor)
    else:
        raise DataError(f"unknown weighting mode {mode!r}")
    return ClassWeights(wp, 1.0 - wp)


# ---------------------------------------------------------------------------
# loading


def load_schema(path: str | Path) -> dict:
    """Read a schema sidecar written in YAML or JSON.

    The document may contain ``label`` (column name), ``label_map`` (raw label
    to -1/+1) and ``kinds`` (column name to feature kind).  A flat mapping of
    column names to kinds is also accepted.
    """
    text = Path(path).read_text()
    doc = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise DataError("schema must be a mapping")
    if "kinds" not in doc and all(v in FEATURE_KINDS for v in doc.values()):
        doc = {"kinds": doc}
    return doc


def _parse_label(raw: str, label_map: Mapping[str, int] | None, row: int) -> int:
    if label_map is not None:
        if raw in label_map:
            value = int(label_map[raw])
        else:
            try:
                value = int(label_map[float(raw)]) if float(raw) in label_map else None
            except ValueError:
                value = None
            if value is None:
                raise DataError(f"row {row}: unknown label value {raw!r}")
        if value not in (-1, 1):
            raise DataError(f"label map must send labels to -1 or +1, got {value}")
        return value
    try:
        value = float(raw)
    except ValueError:
        raise DataError(f"row {row}: unknown label value {raw!r} (declare a label_map)") from None
    if value not in (-1.0, 1.0):
        raise DataError(f"row {row}: unknown label value {raw!r} (declare a label_map)")
    return int(value)


def load_dataset(
    path: str | Path,
    schema: Mapping[str, Any] | str | Path | None = None,
    label: str | None = None,
    label_map: Mapping[Any, int] | None = None,
) -> Dataset:
    """Load a CSV file into a :class:`Dataset`.

    Parameters
    ----------
    path : str or Path
        CSV file with a header row.
    schema : mapping or path, optional
        Feature kinds and label settings (see :func:`load_schema`).  Columns
        without a declared kind are inferred: 0/1 columns are binary, numeric
        columns real and anything else categorical.
    label : str, optional
        Label column; overrides the schema.  Defaults to the last column.
    label_map : mapping, optional
        Map from raw label values to -1/+1; overrides the schema.

    Returns
    -------
    Dataset

    Raises
    ------
    DataError
        On malformed rows (the message names the 1-based data row and the
        column), unknown labels or an empty file.
    """
    if isinstance(schema, (str, Path)):
        schema = load_schema(schema)
    schema = dict(schema or {})
    label = label or schema.get("label")
    if label_map is None:
        label_map = schema.get("label_map")
    if label_map is not None:
        label_map = {(k if isinstance(k, str) else k): int(v) for k, v in label_map.items()}
        label_map.update({str(k): v for k, v in list(label_map.items())})
    declared = dict(schema.get("kinds", {}))

    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError("dataset is empty") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError("dataset is empty")
    label = label or header[-1]
    if label not in header:
        raise DataError(f"label column {label!r} not found")
    li = header.index(label)
    feat_cols = [c for c in range(len(header)) if c != li]
    names = [header[c] for c in feat_cols]
    for name in declared:
        if name not in names:
            raise DataError(f"schema declares unknown column {name!r}")

    raw = []
    y = []
    for r, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise DataError(f"row {r}: expected {len(header)} fields, found {len(row)}")
        y.append(_parse_label(row[li].strip(), label_map, r))
        raw.append([row[c].strip() for c in feat_cols])

    columns = []
    kinds = []
    categories: dict[int, tuple] = {}
    for j, name in enumerate(names):
        values = [raw[i][j] for i in range(len(raw))]
        kind = declared.get(name)
        if kind is not None and kind not in FEATURE_KINDS:
            raise DataError(f"column {name!r}: unknown kind {kind!r}")
        if kind is None:
            try:
                numeric = [float(v) for v in values]
            except ValueError:
                kind = "categorical"
            else:
                kind = "binary" if set(numeric) <= {0.0, 1.0} else "real"
        if kind == "categorical":
            cats = tuple(sorted(set(values)))
            categories[j + 1] = cats
            code = {c: float(k) for k, c in enumerate(cats)}
            col = [code[v] for v in values]
        else:
            col = []
            for i, v in enumerate(values, start=1):
                try:
                    x = float(v)
                except ValueError:
                    raise DataError(f"row {i}: column {name!r} has non-numeric value {v!r}") from None
                if not math.isfinite(x):
                    raise DataError(f"row {i}: column {name!r} has non-finite value {v!r}")
                if kind == "binary" and x not in (0.0, 1.0):
                    raise DataError(f"row {i}: binary column {name!r} has value {v!r}")
                col.append(x)
        columns.append(col)
        kinds.append(kind)

    N = len(rows)
    X = np.column_stack([np.ones(N)] + [np.asarray(c, dtype=float) for c in columns])
    return Dataset(X=X, y=np.asarray(y), feature_names=tuple(names), kinds=tuple(kinds), categories=categories)


def dataset_from_arrays(
    X: np.ndarray,
    y: Sequence[int],
    feature_names: Sequence[str] | None = None,
    kinds: Sequence[str] | None = None,
    add_intercept: bool = True,
) -> Dataset:
    """Build a dataset from in-memory arrays.

    Parameters
    ----------
    X : array_like
        Feature matrix of shape ``(N, P)`` (or ``(N, P + 1)`` when
        ``add_intercept`` is False and the first column is already constant).
    y : sequence of int
        Labels in ``{-1, +1}``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if add_intercept:
        X = np.column_stack([np.ones(X.shape[0]), X])
    P = X.shape[1] - 1
    if feature_names is None:
        feature_names = tuple(f"x{j}" for j in range(1, P + 1))
    if kinds is None:
        kinds = tuple(
            "binary" if np.all((X[:, j] == 0) | (X[:, j] == 1)) else "real" for j in range(1, P + 1)
        )
    return Dataset(X=X, y=np.asarray(y), feature_names=tuple(feature_names), kinds=tuple(kinds))


# ---------------------------------------------------------------------------
# binarization


def _midpoints(x: np.ndarray) -> np.ndarray:
    u = np.unique(x)
    return (u[:-1] + u[1:]) / 2.0


def binarize(
    dataset: Dataset,
    policy: str = "midpoints",
    thresholds: Mapping[str, Sequence[float]] | Sequence[float] | None = None,
    complement: bool = False,
    expand_real: bool = True,
) -> tuple[Dataset, BinaryRuleSet]:
    """Convert every feature into binary rules.

    Parameters
    ----------
    dataset : Dataset
        Raw data with declared feature kinds.
    policy : {"midpoints", "explicit", "domain"}
        How thresholds for real features are chosen.  ``midpoints`` places one
        threshold between each pair of adjacent distinct values; ``explicit``
        takes a per-feature mapping of thresholds; ``domain`` applies one list
        of thresholds to every real feature (for instance ``[3]`` for the
        1-10 cytology scales).
    thresholds : mapping or sequence, optional
        Thresholds for the ``explicit`` and ``domain`` policies.
    complement : bool, default False
        Also add the negation ``1 - h`` of every rule.
    expand_real : bool, default True
        When False, real features are passed through unchanged and only
        categorical features are expanded.

    Returns
    -------
    (Dataset, BinaryRuleSet)
        The rule dataset and the rule bookkeeping.  When ``expand_real`` is
        False the returned dataset may contain real columns.

    Raises
    ------
    DataError
        When a real feature with a single distinct value would produce no rule
        under the ``midpoints`` policy.
    """
    if policy not in ("midpoints", "explicit", "domain"):
        raise DataError(f"unknown threshold policy {policy!r}")
    if policy == "explicit" and not isinstance(thresholds, Mapping):
        raise DataError("explicit policy needs a mapping from feature name to thresholds")
    if policy == "domain" and (thresholds is None or isinstance(thresholds, Mapping)):
        raise DataError("domain policy needs a list of thresholds")

    cols: list[np.ndarray] = []
    specs: list[RuleSpec] = []
    groups: list[RuleGroup] = []
    kinds: list[str] = []

    def add(h: np.ndarray, spec: RuleSpec, kind: str = "binary") -> int:
        cols.append(h.astype(float))
        specs.append(spec)
        kinds.append(kind)
        return len(cols)

    for j, (name, kind) in enumerate(zip(dataset.feature_names, dataset.kinds), start=1):
        x = dataset.X[:, j]
        members: list[int] = []
        ths: tuple[float, ...] = ()
        if kind == "binary":
            members.append(add(x == 1, RuleSpec(name, "binary-passthrough", "is")))
            if complement:
                members.append(add(x != 1, RuleSpec(name, "binary-passthrough", "not", complement=True)))
            prov = "binary-passthrough"
        elif kind == "categorical":
            cats = dataset.categories.get(j, tuple(sorted(set(x.tolist()))))
            for k, cat in enumerate(cats):
                members.append(add(x == k, RuleSpec(name, "category-indicator", "==", cat)))
                if complement:
                    members.append(add(x != k, RuleSpec(name, "category-indicator", "!=", cat, True)))
            prov = "category-indicator"
        elif not expand_real:
            cols.append(x.copy())
            specs.append(RuleSpec(name, "real-passthrough", "value"))
            kinds.append("real")
            groups.append(RuleGroup(name, "real-passthrough", (len(cols),)))
            continue
        else:
            if policy == "midpoints":
                ths = tuple(float(v) for v in _midpoints(x))
                if not ths:
                    raise DataError(f"real feature {name!r} has a single distinct value and yields no rules")
            elif policy == "explicit":
                ths = tuple(sorted(float(v) for v in thresholds.get(name, ())))  # type: ignore[union-attr]
            else:
                ths = tuple(sorted(float(v) for v in thresholds))  # type: ignore[union-attr]
            for v in ths:
                members.append(add(x >= v, RuleSpec(name, "threshold", ">=", v)))
                if complement:
                    members.append(add(x < v, RuleSpec(name, "threshold", "<", v, True)))
            prov = "threshold"
        groups.append(RuleGroup(name, prov, tuple(members), ths))

    rule_set = BinaryRuleSet(tuple(groups), tuple(specs))
    Z = np.column_stack([np.ones(dataset.N)] + cols) if cols else np.ones((dataset.N, 1))
    out = Dataset(
        X=Z,
        y=dataset.y.copy(),
        feature_names=tuple(s.name if s.op != "value" else s.parent for s in specs),
        kinds=tuple(kinds),
        loss_denominator=dataset.loss_denominator,
        rule_set=rule_set,
    )
    return out, rule_set

"""End-to-end training pipeline, cross-validation and regularization sweeps.

A run is described by one configuration mapping (usually read from YAML):

.. code-block:: yaml

    family: slim            # slim | pilm | mofn | tilm
    data: datasets/breastcancer.csv
    schema: datasets/breastcancer.schema.yaml
    seed: 0
    C0: 0.025               # a number, or "0.9/NP", "1/N", ...
    coefficients: {bound: 10, intercept_bound: 100}
    weights: {mode: unweighted}
    constraints: {max_model_size: 10, max_fpr: 0.2, signs: {Mitoses: nonneg}}
    solver: {time_limit: 60}

See ``DEFAULTS`` for every key.
"""

from __future__ import annotations

import copy
import csv
import dataclasses
import math
import re
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from .benders import BendersOptions, BendersResult, benders_solve
from .coefsets import InterpretabilitySet, digit_pattern_values
from .data import ClassWeights, DataError, Dataset, binarize, load_dataset, load_schema, make_weights
from .formulation import FormulationError, PenaltyConfig, PersonalizedLevels, build_program
from .models import TrainedModel, classification_metrics
from .problem import OperationalConstraints, _cap
from .reduction import ReductionConfig, ReductionResult, epsilon_from_feasible, reduce, relaxation_optimum
from .solver import SolveOptions, SolveResult, solve

__all__ = [
    "DEFAULTS",
    "ConfigError",
    "InfeasibleError",
    "NoIncumbentError",
    "CertificationError",
    "TrainOutcome",
    "load_config",
    "resolve_config",
    "prepare_data",
    "train",
    "certify",
    "stratified_folds",
    "cross_validate",
    "CVResult",
    "sweep_regularization",
    "meaningful_c0_range",
]

DEFAULTS: dict[str, Any] = {
    "family": "slim",
    "data": None,
    "schema": None,
    "label": None,
    "seed": 0,
    "C0": 0.01,
    "C0_per_feature": {},
    "l1_tiebreak_weight": None,
    "margin": None,
    "normalize": "auto",
    "coefficients": {"bound": 10, "intercept_bound": 100, "significant_digits": None, "per_feature": {}},
    "weights": {"mode": "unweighted", "w_plus": None},
    "binarize": {"policy": "midpoints", "thresholds": None, "complement": None},
    "constraints": {},
    "pilm": {"levels": None, "costs": None},
    "tilm": {"feature_cost": 0.01, "rule_cost": 0.005, "max_rules": 3},
    "solver": {"time_limit": 60.0, "gap_tolerance": 0.0, "node_limit": None},
    "benders": {"enabled": False, "loss": "logistic", "gap_tol": 1e-6, "max_iters": 500},
    "reduction": {"enabled": False, "level_set_width": "auto"},
    "cv": {"folds": 10},
    "sweep": {"C0": [], "holdout": 0.0, "allow_outside_range": False},
}


class ConfigError(ValueError):
    """Invalid or inconsistent configuration (the message names the key)."""


class InfeasibleError(RuntimeError):
    """The training program has no feasible model."""


class NoIncumbentError(RuntimeError):
    """A limit was reached before any feasible model was found."""


class CertificationError(RuntimeError):
    """A trained model violates a constraint when re-checked from scratch."""


# ---------------------------------------------------------------------------
# configuration


def _merge(base: Mapping[str, Any], over: Mapping[str, Any]) -> dict[str, Any]:
    out = copy.deepcopy(dict(base))
    for k, v in over.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), Mapping) and k not in ("constraints", "C0_per_feature"):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path: str | Path) -> dict[str, Any]:
    """Read a YAML or JSON configuration document."""
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, Mapping):
        raise ConfigError(f"config {path} must be a mapping")
    base = Path(path).parent
    for key in ("data", "schema"):
        if isinstance(doc.get(key), str) and not Path(doc[key]).is_absolute():
            cand = base / doc[key]
            if cand.exists():
                doc[key] = str(cand)
    return dict(doc)


def resolve_config(config: Mapping[str, Any] | None = None, **overrides: Any) -> dict[str, Any]:
    """Fill in defaults, apply overrides and validate the basic shape."""
    unknown = set(config or {}) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = _merge(DEFAULTS, config or {})
    cfg = _merge(cfg, {k: v for k, v in overrides.items() if v is not None})
    if cfg["family"] not in ("slim", "pilm", "mofn", "tilm"):
        raise ConfigError(f"family: unknown model family {cfg['family']!r}")
    if cfg["normalize"] not in ("auto", True, False):
        raise ConfigError("normalize: must be auto, true or false")
    try:
        cfg["seed"] = int(cfg["seed"])
    except (TypeError, ValueError):
        raise ConfigError("seed: must be an integer") from None
    return cfg


_C0_RE = re.compile(r"^\s*([0-9.eE+-]+)\s*/\s*(N|NP|P)\s*$")


def _resolve_C0(value: Any, N: int, P: int, key: str = "C0") -> float:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        c = float(value)
    elif isinstance(value, str):
        m = _C0_RE.match(value)
        if not m:
            try:
                c = float(value)
            except ValueError:
                raise ConfigError(f"{key}: expected a number or an expression like '0.9/NP', got {value!r}") from None
        else:
            num = float(m.group(1))
            den = {"N": N, "NP": N * P, "P": P}[m.group(2)]
            c = num / max(den, 1)
    else:
        raise ConfigError(f"{key}: expected a number, got {value!r}")
    if not (c >= 0 and math.isfinite(c)):
        raise ConfigError(f"{key}: must be a non-negative number")
    return c


# ---------------------------------------------------------------------------
# data preparation


def _label_names(schema: Mapping[str, Any] | None) -> tuple[str, str]:
    lm = (schema or {}).get("label_map") or {}
    pos = [str(k) for k, v in lm.items() if int(v) == 1]
    neg = [str(k) for k, v in lm.items() if int(v) == -1]
    return (pos[0] if len(pos) == 1 else "+1", neg[0] if len(neg) == 1 else "-1")


def load_raw(cfg: Mapping[str, Any]) -> tuple[Dataset, str, str]:
    """Load the configured data file."""
    if not cfg.get("data"):
        raise ConfigError("data: no dataset given")
    schema = None
    if cfg.get("schema"):
        try:
            schema = load_schema(cfg["schema"])
        except (OSError, DataError, yaml.YAMLError) as exc:
            raise ConfigError(f"schema: {exc}") from exc
    try:
        ds = load_dataset(cfg["data"], schema, label=cfg.get("label"))
    except OSError as exc:
        raise ConfigError(f"data: {exc}") from exc
    except DataError as exc:
        raise ConfigError(f"data: {exc}") from exc
    pos, neg = _label_names(schema)
    return ds, pos, neg


def _fit_scaling(raw: Dataset, mode: Any) -> dict[str, tuple[float, float]]:
    if mode is False:
        return {}
    out = {}
    for j, (name, kind) in enumerate(zip(raw.feature_names, raw.kinds), start=1):
        if kind != "real":
            continue
        x = raw.X[:, j]
        if mode == "auto" and np.all(x == np.round(x)):
            continue
        lo, hi = float(x.min()), float(x.max())
        out[name] = (lo, hi - lo if hi > lo else 1.0)
    return out


def _apply_scaling(raw: Dataset, scaling: Mapping[str, tuple[float, float]]) -> Dataset:
    if not scaling:
        return raw
    X = raw.X.copy()
    for j, n in enumerate(raw.feature_names, start=1):
        if n in scaling:
            off, sc = scaling[n]
            X[:, j] = (X[:, j] - off) / sc
    return Dataset(X, raw.y, raw.feature_names, raw.kinds, dict(raw.categories), raw.loss_denominator, raw.rule_set)


def prepare_data(cfg: Mapping[str, Any], raw: Dataset, fit_on: Dataset | None = None) -> tuple[Dataset, dict]:
    """Turn raw data into the model's design matrix.

    Scaling constants and rule thresholds are learned from ``fit_on``
    (default ``raw``) and applied to ``raw``; cross-validation uses this to
    learn them from the training folds only.

    Returns
    -------
    (design, scaling)
    """
    fit_on = raw if fit_on is None else fit_on
    scaling = _fit_scaling(fit_on, cfg["normalize"])
    fit_scaled = _apply_scaling(fit_on, scaling)
    family = cfg["family"]
    b = cfg["binarize"]
    needs_rules = family in ("mofn", "tilm")
    has_cat = any(k == "categorical" for k in raw.kinds)
    if not needs_rules and not has_cat:
        return _apply_scaling(raw, scaling), scaling
    complement = b.get("complement")
    if complement is None:
        complement = family == "mofn"
    thresholds = b.get("thresholds")
    policy = b.get("policy", "midpoints")
    if isinstance(thresholds, list) and policy == "midpoints":
        policy = "domain"
    try:
        _, rules = binarize(fit_scaled, policy, thresholds, complement=bool(complement), expand_real=needs_rules)
        design = rules.apply(_apply_scaling(raw, scaling))
    except DataError as exc:
        raise ConfigError(f"binarize: {exc}") from exc
    return design, scaling


def _coef_set(cfg: Mapping[str, Any], design: Dataset) -> InterpretabilitySet:
    c = cfg["coefficients"]
    try:
        bound = int(c.get("bound", 10))
        ib = int(c.get("intercept_bound", 100))
    except (TypeError, ValueError):
        raise ConfigError("coefficients: bound and intercept_bound must be integers") from None
    digits = c.get("significant_digits")
    if digits:
        feat = digit_pattern_values(bound, int(digits))
        inter = digit_pattern_values(ib, int(digits))
    else:
        feat = list(range(-bound, bound + 1))
        inter = list(range(-ib, ib + 1))
    values = [inter] + [feat] * design.P
    names = {n: j for j, n in enumerate(design.feature_names, start=1)}
    for name, spec in (c.get("per_feature") or {}).items():
        cols = _columns_for(name, design, names, "coefficients.per_feature")
        for j in cols:
            if isinstance(spec, Mapping):
                values[j] = list(range(int(spec["lower"]), int(spec["upper"]) + 1))
            else:
                values[j] = list(spec)
    try:
        return InterpretabilitySet(values)
    except ValueError as exc:
        raise ConfigError(f"coefficients: {exc}") from exc


def _columns_for(name: Any, design: Dataset, names: Mapping[str, int], key: str) -> list[int]:
    if isinstance(name, int) and not isinstance(name, bool):
        if not (1 <= name <= design.P):
            raise ConfigError(f"{key}: column index {name} out of range")
        return [name]
    if name in names:
        return [names[name]]
    if design.rule_set is not None:
        for g in design.rule_set.groups:
            if g.parent == name:
                return list(g.columns)
    raise ConfigError(f"{key}: unknown feature {name!r}")


def _constraints(cfg: Mapping[str, Any], design: Dataset) -> OperationalConstraints:
    raw = dict(cfg.get("constraints") or {})
    names = {n: j for j, n in enumerate(design.feature_names, start=1)}
    allowed = {"max_model_size", "max_fpr", "max_fnr", "prediction_budget", "signs", "either_or", "if_then", "hierarchy"}
    bad = set(raw) - allowed
    if bad:
        raise ConfigError(f"constraints: unknown keys {sorted(bad)}")

    def one(name: Any, key: str) -> int:
        cols = _columns_for(name, design, names, key)
        if len(cols) != 1:
            raise ConfigError(f"{key}: {name!r} names several rule columns; refer to a single column")
        return cols[0]

    signs = {}
    for name, s in (raw.get("signs") or {}).items():
        for j in _columns_for(name, design, names, "constraints.signs"):
            signs[j] = s
    try:
        return OperationalConstraints(
            max_model_size=raw.get("max_model_size"),
            max_fpr=raw.get("max_fpr"),
            max_fnr=raw.get("max_fnr"),
            prediction_budget=raw.get("prediction_budget"),
            signs=signs,
            either_or=tuple((one(a, "constraints.either_or"), one(b, "constraints.either_or")) for a, b in raw.get("either_or") or ()),
            if_then=tuple(
                (tuple(one(a, "constraints.if_then") for a in ants), one(c, "constraints.if_then"))
                for ants, c in raw.get("if_then") or ()
            ),
            hierarchy=tuple((one(a, "constraints.hierarchy"), one(b, "constraints.hierarchy")) for a, b in raw.get("hierarchy") or ()),
        )
    except ValueError as exc:
        raise ConfigError(f"constraints: {exc}") from exc


def _weights(cfg: Mapping[str, Any], design: Dataset) -> ClassWeights:
    w = cfg["weights"]
    try:
        return make_weights(design, w.get("mode", "unweighted"), w.get("w_plus"))
    except DataError as exc:
        raise ConfigError(f"weights: {exc}") from exc


def _penalty(cfg: Mapping[str, Any], design: Dataset) -> PenaltyConfig:
    C0 = _resolve_C0(cfg["C0"], design.N, design.P)
    names = {n: j for j, n in enumerate(design.feature_names, start=1)}
    per = {}
    for name, v in (cfg.get("C0_per_feature") or {}).items():
        for j in _columns_for(name, design, names, "C0_per_feature"):
            per[j] = _resolve_C0(v, design.N, design.P, f"C0_per_feature.{name}")
    levels = None
    p = cfg.get("pilm") or {}
    if p.get("levels") is not None:
        try:
            levels = PersonalizedLevels(tuple(tuple(s) for s in p["levels"]), tuple(p["costs"]))
        except (FormulationError, TypeError, KeyError) as exc:
            raise ConfigError(f"pilm: {exc}") from exc
    t = cfg.get("tilm") or {}
    return PenaltyConfig(
        kind=cfg["family"],
        C0=C0,
        C0_per_feature=per,
        l1_tiebreak_weight=cfg.get("l1_tiebreak_weight"),
        levels=levels,
        feature_cost=float(t.get("feature_cost", 0.01)),
        rule_cost=float(t.get("rule_cost", 0.005)),
        max_rules=int(t.get("max_rules", 3)),
    )


def _solve_options(cfg: Mapping[str, Any]) -> SolveOptions:
    s = cfg["solver"]
    try:
        return SolveOptions(
            time_limit=float(s.get("time_limit", 60.0)),
            gap_tolerance=float(s.get("gap_tolerance", 0.0)),
            node_limit=s.get("node_limit"),
            deterministic_seed=int(cfg["seed"]),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver: {exc}") from exc


# ---------------------------------------------------------------------------
# certification


def certify(model: TrainedModel, design: Dataset, ops: OperationalConstraints, L: InterpretabilitySet | None = None) -> list[str]:
    """Re-check a model against every hard constraint from the raw scores.

    Uses only the coefficients, the design matrix and the decision rule
    ``score >= 0`` predicts ``+1``; nothing from the solver is trusted.

    Returns
    -------
    list of str
        Names of violated constraints (empty when the model is certified).
    """
    lam = model.coefficients
    out = []
    if L is not None and not L.contains(lam):
        out.append("value-set")
    used = lam != 0
    if ops.max_model_size is not None and int(used[1:].sum()) > ops.max_model_size:
        out.append("max_model_size")
    for j, s in ops.signs.items():
        if (s == "nonneg" and lam[j] < 0) or (s == "nonpos" and lam[j] > 0):
            out.append(f"sign({design.feature_names[j - 1]})")
    for a, b in ops.either_or:
        if used[a] and used[b]:
            out.append(f"either_or({a},{b})")
    for ants, c in ops.if_then:
        if any(used[a] for a in ants) and not used[c]:
            out.append(f"if_then({list(ants)}->{c})")
    for leaf, node in ops.hierarchy:
        if used[leaf] and not used[node]:
            out.append(f"hierarchy({leaf}->{node})")
    yhat = np.where(design.X @ lam >= 0, 1, -1)
    y = design.y
    if ops.max_fpr is not None and int(np.sum((yhat == 1) & (y == -1))) > _cap(ops.max_fpr, int(np.sum(y == -1))):
        out.append("max_fpr")
    if ops.max_fnr is not None and int(np.sum((yhat == -1) & (y == 1))) > _cap(ops.max_fnr, int(np.sum(y == 1))):
        out.append("max_fnr")
    if ops.prediction_budget is not None and int(np.sum(yhat == 1)) > _cap(ops.prediction_budget, y.size):
        out.append("prediction_budget")
    return out


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainOutcome:
    """A trained model plus the artifacts produced on the way."""

    model: TrainedModel
    design: Dataset
    solve_result: SolveResult | None = None
    benders: BendersResult | None = None
    reduction: ReductionResult | None = None


def train(
    config: Mapping[str, Any],
    raw: Dataset | None = None,
    labels: tuple[str, str] | None = None,
    fit_on: Dataset | None = None,
) -> TrainOutcome:
    """Run the full pipeline: prepare data, build, optionally reduce, solve, certify.

    Parameters
    ----------
    config : mapping
        Run configuration (see ``DEFAULTS``).
    raw : Dataset, optional
        Raw data; loaded from ``config["data"]`` when omitted.
    labels : (str, str), optional
        Display names of the positive and negative class.

    Raises
    ------
    ConfigError, InfeasibleError, NoIncumbentError, CertificationError
    """
    cfg = resolve_config(config)
    if raw is None:
        raw, pos, neg = load_raw(cfg)
        labels = (pos, neg)
    pos, neg = labels or ("+1", "-1")
    design, scaling = prepare_data(cfg, raw, fit_on)
    if design.n_pos == 0 or design.n_neg == 0:
        raise ConfigError("data: training data must contain both classes")
    weights = _weights(cfg, design)
    penalty = _penalty(cfg, design)
    ops = _constraints(cfg, design)
    L = _coef_set(cfg, design) if cfg["family"] in ("slim", "tilm", "pilm") else None
    opts = _solve_options(cfg)
    margin = cfg.get("margin")
    bend = cfg["benders"]
    red_cfg = cfg["reduction"]
    try:
        ip = build_program(design, penalty, L, weights, ops, margin)
    except (FormulationError, ValueError) as exc:
        raise ConfigError(f"{cfg['family']}: {exc}") from exc
    assert ip.problem is not None
    L_eff = ip.problem.L
    margin_eff = ip.big_m.margin if ip.big_m is not None else None

    outcome = TrainOutcome(model=None, design=design)  # type: ignore[arg-type]
    if bend.get("enabled"):
        if cfg["family"] != "slim":
            raise ConfigError("benders: only the slim family supports convex losses")
        if dataclasses.replace(ops, signs={}) != OperationalConstraints():
            raise ConfigError("benders: only sign constraints can be combined with a convex loss")
        res = benders_solve(
            design,
            bend.get("loss", "logistic"),
            L_eff,
            penalty.C0,
            weights,
            penalty.C0_per_feature,
            float(ip.l1_tiebreak_weight),
            BendersOptions(
                gap_tol=float(bend.get("gap_tol", 1e-6)),
                max_iters=int(bend.get("max_iters", 500)),
                time_limit=opts.time_limit,
                proxy_time_limit=opts.time_limit,
            ),
        )
        outcome.benders = res
        lam = res.coefficients
        solve_meta = {
            "method": "benders",
            "loss": bend.get("loss", "logistic"),
            "status": "optimal" if res.converged else "feasible-iteration-limit",
            "objective": res.objective,
            "dual_bound": res.lower_bound,
            "gap": res.gap,
            "iterations": len(res.trace),
            "stop_reason": res.stop_reason,
        }
    else:
        if red_cfg.get("enabled"):
            if ops.has_rate_constraints:
                raise ConfigError("reduction: cannot be combined with error-rate or budget constraints")
            width = red_cfg.get("level_set_width", "auto")
            if width == "auto":
                zero = np.array([L_eff.nearest(j, 0.0) for j in range(L_eff.n_coef)])
                from .heuristics import local_search

                _, f_hat = local_search(ip.problem, zero, time_limit=opts.time_limit / 10)
                f_hat = min(f_hat, float(ip.problem.objective(zero)[0]) if ip.problem.feasible(zero)[0] else math.inf)
                if not math.isfinite(f_hat):
                    raise ConfigError("reduction: no feasible model found to derive the level-set width; set it explicitly")
                width = epsilon_from_feasible(f_hat, relaxation_optimum(ip))
            red = reduce(ip, design, ReductionConfig(float(width)))
            outcome.reduction = red
            ip_train = build_program(
                red.dataset,
                dataclasses.replace(penalty, l1_tiebreak_weight=ip.l1_tiebreak_weight),
                L,
                weights,
                ops,
                margin_eff,
            )
        else:
            ip_train = ip
        res_s = solve(ip_train, opts)
        fallback = False
        if (
            outcome.reduction is not None
            and res_s.coefficients is not None
            and not outcome.reduction.agrees(design.X, res_s.coefficients, ip.problem.margin)
        ):
            # the reduced optimum mislabels a removed example, so its optimality
            # on the full data is not guaranteed; solve the full program instead
            fallback = True
            res_s = solve(ip, opts)
        outcome.solve_result = res_s
        if res_s.status == "infeasible":
            raise InfeasibleError("the training program is infeasible: no model satisfies every constraint")
        if res_s.status == "unbounded":
            raise InfeasibleError("the training program is unbounded")
        if not res_s.has_solution or res_s.coefficients is None:
            raise NoIncumbentError(f"no feasible model found within the limits (bound {res_s.dual_bound:.6g})")
        lam = res_s.coefficients
        solve_meta = {
            "method": "branch-and-bound",
            "status": res_s.status,
            "objective": res_s.objective,
            "dual_bound": res_s.dual_bound,
            "gap": res_s.gap,
            "nodes": res_s.node_count,
        }
        if outcome.reduction is not None:
            solve_meta["reduced_examples"] = int(outcome.reduction.removed.size)
            solve_meta["reduction_fallback"] = fallback

    metrics = classification_metrics(lam, design.X, design.y, weights)
    metrics["model_size"] = int(np.count_nonzero(lam[1:]))
    metrics["objective"] = float(ip.problem.objective(lam)[0])
    model = TrainedModel(
        family=cfg["family"],
        feature_names=design.feature_names,
        coefficients=lam,
        raw_feature_names=raw.feature_names,
        rule_set=design.rule_set,
        scaling=scaling,
        positive_label=pos,
        negative_label=neg,
        metrics=metrics,
        solve=solve_meta,
        config=_public_config(cfg),
    )
    violated = certify(model, design, ops, L_eff)
    if violated:
        raise CertificationError(f"trained model violates: {', '.join(violated)}")
    outcome.model = model
    return outcome


def _public_config(cfg: Mapping[str, Any]) -> dict:
    keep = ("family", "seed", "C0", "C0_per_feature", "l1_tiebreak_weight", "margin", "normalize", "coefficients", "weights", "binarize", "constraints", "pilm", "tilm", "solver", "benders", "reduction")
    out = {k: copy.deepcopy(cfg[k]) for k in keep}
    out["data"] = Path(cfg["data"]).name if cfg.get("data") else None
    return out


# ---------------------------------------------------------------------------
# cross-validation


def stratified_folds(y: Sequence[int], folds: int, seed: int) -> np.ndarray:
    """Fold id of every example; each class is shuffled and dealt round-robin.

    The assignment depends only on ``y``, ``folds`` and ``seed``.
    """
    y = np.asarray(y)
    if folds < 2:
        raise ConfigError("cv.folds: need at least 2 folds")
    if folds > y.size:
        raise ConfigError(f"cv.folds: {folds} folds for {y.size} examples")
    rng = np.random.default_rng(seed)
    fold = np.empty(y.size, dtype=int)
    start = 0
    for cls in (1, -1):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(idx.size)]
        fold[idx] = (start + np.arange(idx.size)) % folds
        start = (start + idx.size) % folds
    return fold


@dataclass
class CVResult:
    """Per-fold metrics, their summary and the model trained on all data."""

    folds: list[dict]
    summary: dict
    final: TrainOutcome | None

    def to_csv(self, path: str | Path) -> None:
        cols = ["fold", "n_train", "n_test", "train_error", "test_error", "test_tpr", "test_fpr", "model_size", "status", "gap"]
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols)
            w.writeheader()
            for r in self.folds:
                w.writerow({k: r.get(k) for k in cols})


def _summary(rows: list[dict]) -> dict:
    te = [r["test_error"] for r in rows]
    tr = [r["train_error"] for r in rows]
    sizes = [r["model_size"] for r in rows]
    gaps = [r["gap"] for r in rows if r["gap"] is not None]
    return {
        "folds": len(rows),
        "test_error_mean": float(np.mean(te)),
        "test_error_std": float(np.std(te, ddof=1)) if len(te) > 1 else 0.0,
        "train_error_mean": float(np.mean(tr)),
        "train_error_std": float(np.std(tr, ddof=1)) if len(tr) > 1 else 0.0,
        "model_size_median": float(statistics.median(sizes)),
        "model_size_min": int(min(sizes)),
        "model_size_max": int(max(sizes)),
        "max_gap": float(max(gaps)) if gaps else 0.0,
        "all_optimal": all(r["status"] == "optimal" for r in rows),
    }


def cross_validate(
    config: Mapping[str, Any],
    folds: int | None = None,
    seed: int | None = None,
    raw: Dataset | None = None,
    fit_final: bool = True,
) -> CVResult:
    """Stratified K-fold cross-validation plus a final model on all data.

    Every fold learns scaling and rule thresholds from its own training part.

    Raises
    ------
    ConfigError
        When a training part lacks one of the classes.
    """
    cfg = resolve_config(config)
    labels = None
    if raw is None:
        raw, pos, neg = load_raw(cfg)
        labels = (pos, neg)
    k = int(folds if folds is not None else cfg["cv"]["folds"])
    seed = cfg["seed"] if seed is None else int(seed)
    assign = stratified_folds(raw.y, k, seed)
    rows = []
    for f in range(k):
        test_idx = np.flatnonzero(assign == f)
        train_idx = np.flatnonzero(assign != f)
        tr = raw.subset(train_idx)
        te = raw.subset(test_idx)
        if tr.n_pos == 0 or tr.n_neg == 0:
            raise ConfigError(f"cv: fold {f} leaves a training part without one of the classes")
        out = train(cfg, tr, labels)
        m = out.model
        test = m.evaluate(te)
        rows.append(
            {
                "fold": f,
                "n_train": tr.N,
                "n_test": te.N,
                "train_error": m.metrics["error"],
                "test_error": test["error"],
                "test_tpr": test["tpr"],
                "test_fpr": test["fpr"],
                "model_size": m.model_size,
                "status": m.solve.get("status"),
                "gap": m.solve.get("gap"),
            }
        )
    final = train(cfg, raw, labels) if fit_final else None
    return CVResult(rows, _summary(rows), final)


# ---------------------------------------------------------------------------
# regularization path


def meaningful_c0_range(N: int, P: int) -> tuple[float, float]:
    """``[1/(N P), 1 - 1/N]``: below it only accuracy matters, above it only sparsity."""
    return 1.0 / (N * P), 1.0 - 1.0 / N


def sweep_regularization(
    config: Mapping[str, Any],
    C0_values: Sequence[float] | None = None,
    raw: Dataset | None = None,
    test: Dataset | None = None,
) -> list[dict]:
    """Train one model per ``C0`` and tabulate error and size.

    Parameters
    ----------
    config : mapping
        Base configuration; its ``C0`` is replaced for each run.
    C0_values : sequence of float, optional
        Defaults to ``config["sweep"]["C0"]``.
    raw, test : Dataset, optional
        Training data and held-out data.  When ``test`` is omitted and
        ``sweep.holdout`` is positive, a stratified holdout is split off.

    Returns
    -------
    list of dict
        Rows with ``C0, train_error, test_error, model_size, objective, status``.
    """
    cfg = resolve_config(config)
    values = list(cfg["sweep"]["C0"] if C0_values is None else C0_values)
    if not values:
        return []
    labels = None
    if raw is None:
        raw, pos, neg = load_raw(cfg)
        labels = (pos, neg)
    hold = float(cfg["sweep"].get("holdout") or 0.0)
    if test is None and hold > 0:
        k = max(2, int(round(1.0 / hold)))
        assign = stratified_folds(raw.y, k, cfg["seed"])
        test = raw.subset(np.flatnonzero(assign == 0))
        raw = raw.subset(np.flatnonzero(assign != 0))
    design, _ = prepare_data(cfg, raw)
    lo, hi = meaningful_c0_range(design.N, design.P)
    rows = []
    for v in values:
        c = _resolve_C0(v, design.N, design.P, "sweep.C0")
        if not cfg["sweep"].get("allow_outside_range") and not (lo - 1e-12 <= c <= hi + 1e-12):
            raise ConfigError(
                f"sweep.C0: {c:g} lies outside [{lo:g}, {hi:g}]; set sweep.allow_outside_range to use it"
            )
        out = train({**cfg, "C0": c}, raw, labels)
        m = out.model
        rows.append(
            {
                "C0": c,
                "train_error": m.metrics["error"],
                "test_error": m.evaluate(test)["error"] if test is not None else math.nan,
                "model_size": m.model_size,
                "objective": m.metrics["objective"],
                "status": m.solve.get("status"),
            }
        )
    return rows


def write_rows_csv(path: str | Path, rows: Sequence[Mapping[str, Any]]) -> None:
    """Write a list of flat dicts as CSV (columns from the first row)."""
    with open(path, "w", newline="") as fh:
        if not rows:
            fh.write("")
            return
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow(r)

import json

import numpy as np
import pytest
import yaml
from hypothesis import given, settings
from hypothesis import strategies as st

from discreteclf.training import (
    CertificationError,
    ConfigError,
    InfeasibleError,
    certify,
    cross_validate,
    load_config,
    meaningful_c0_range,
    resolve_config,
    stratified_folds,
    sweep_regularization,
    train,
)
from discreteclf import OperationalConstraints, TrainedModel, dataset_from_arrays


@pytest.fixture
def small_csv(tmp_path):
    rng = np.random.default_rng(0)
    N = 60
    a = rng.integers(1, 6, N)
    b = rng.integers(1, 6, N)
    c = rng.integers(0, 2, N)
    y = np.where(2 * a + b + rng.normal(0, 1, N) >= 9, "sick", "well")
    lines = ["a,b,c,status"] + [f"{a[i]},{b[i]},{c[i]},{y[i]}" for i in range(N)]
    p = tmp_path / "d.csv"
    p.write_text("\n".join(lines) + "\n")
    s = tmp_path / "d.schema.yaml"
    s.write_text(yaml.safe_dump({"label": "status", "label_map": {"sick": 1, "well": -1}}))
    return p, s


def _cfg(small_csv, **kw):
    p, s = small_csv
    base = {"data": str(p), "schema": str(s), "C0": 0.01, "coefficients": {"bound": 3, "intercept_bound": 20}}
    base.update(kw)
    return base


def test_resolve_config_validation():
    with pytest.raises(ConfigError, match="unknown config keys"):
        resolve_config({"famly": "slim"})
    with pytest.raises(ConfigError):
        resolve_config({"family": "forest"})
    cfg = resolve_config({"solver": {"time_limit": 5}})
    assert cfg["solver"]["time_limit"] == 5 and cfg["solver"]["gap_tolerance"] == 0.0


def test_load_config_resolves_relative_paths(tmp_path):
    (tmp_path / "sub").mkdir()
    (tmp_path / "sub" / "d.csv").write_text("a,y\n1,1\n")
    (tmp_path / "c.yaml").write_text("data: sub/d.csv\nschema: missing.yaml\nC0: 0.9/NP\n")
    cfg = load_config(tmp_path / "c.yaml")
    assert cfg["data"] == str(tmp_path / "sub" / "d.csv")
    assert cfg["schema"] == "missing.yaml"


def test_train_slim(small_csv):
    out = train(_cfg(small_csv))
    m = out.model
    assert m.positive_label == "sick" and m.negative_label == "well"
    assert m.solve["status"] == "optimal"
    assert m.metrics["error"] < 0.25
    assert np.all(np.abs(m.coefficients[1:]) <= 3)
    assert m.metrics["objective"] == pytest.approx(m.solve["objective"])


def test_train_is_byte_identical(small_csv, tmp_path):
    a = train(_cfg(small_csv)).model
    b = train(_cfg(small_csv)).model
    a.save(tmp_path / "a.json")
    b.save(tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_large_c0_gives_zero_model(small_csv):
    m = train(_cfg(small_csv, C0=1.0 - 1.0 / 60 + 1e-3)).model
    assert m.model_size == 0


def test_mofn_and_tilm(small_csv):
    m = train(_cfg(small_csv, family="mofn", C0="0.9/NP", binarize={"thresholds": [3]})).model
    assert m.family == "mofn" and set(m.coefficients[1:].tolist()) <= {0.0, 1.0}
    assert m.rule_set is not None
    t = train(_cfg(small_csv, family="tilm", tilm={"feature_cost": 0.01, "rule_cost": 0.005, "max_rules": 2})).model
    assert t.family == "tilm"


def test_pilm(small_csv):
    m = train(_cfg(small_csv, family="pilm", pilm={"levels": [[0], [-1, 1, -2, 2], [-3, 3]], "costs": [0, 0.01, 0.05]})).model
    assert set(np.abs(m.coefficients[1:]).tolist()) <= {0.0, 1.0, 2.0, 3.0}


def test_benders_path(small_csv):
    out = train(_cfg(small_csv, benders={"enabled": True, "loss": "logistic"}))
    assert out.benders is not None and out.model.solve["method"] == "benders"
    with pytest.raises(ConfigError, match="benders"):
        train(_cfg(small_csv, benders={"enabled": True}, constraints={"max_model_size": 1}))


def test_reduction_path(small_csv):
    out = train(_cfg(small_csv, reduction={"enabled": True}))
    plain = train(_cfg(small_csv))
    assert out.reduction is not None
    assert out.model.metrics["objective"] == pytest.approx(plain.model.metrics["objective"])


def test_constraints_are_certified(small_csv):
    m = train(_cfg(small_csv, C0=0.001, constraints={"max_model_size": 1, "max_fpr": 0.1, "signs": {"b": "nonpos"}})).model
    assert m.model_size <= 1 and m.coefficients[2] <= 0
    assert m.metrics["fpr"] <= 0.1 + 1e-12


def test_infeasible_raises(small_csv):
    with pytest.raises(InfeasibleError):
        train(_cfg(small_csv, constraints={"max_model_size": 0, "max_fpr": 0.0, "max_fnr": 0.0}))


def test_unknown_constraint_column(small_csv):
    with pytest.raises(ConfigError):
        train(_cfg(small_csv, constraints={"signs": {"zzz": "nonneg"}}))


def test_certify_catches_violations():
    ds = dataset_from_arrays(np.array([[1.0, 1.0], [2.0, 0.0], [0.0, 1.0]]), [1, -1, -1])
    m = TrainedModel("slim", ds.feature_names, [0.0, 1.0, -1.0])
    ops = OperationalConstraints(max_model_size=1, max_fpr=0.0, signs={2: "nonneg"})
    bad = certify(m, ds, ops)
    assert "max_model_size" in bad and "max_fpr" in bad and any(v.startswith("sign") for v in bad)
    assert certify(m, ds, OperationalConstraints()) == []


def test_certification_error_is_distinct():
    assert not issubclass(CertificationError, ValueError)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from([-1, 1]), min_size=10, max_size=60), st.integers(2, 10), st.integers(0, 100))
def test_stratified_folds(y, k, seed):
    y = np.array(y)
    f = stratified_folds(y, k, seed)
    assert np.array_equal(f, stratified_folds(y, k, seed))
    for cls in (-1, 1):
        counts = np.bincount(f[y == cls], minlength=k)
        assert counts.max() - counts.min() <= 1


def test_cross_validate(small_csv):
    res = cross_validate(_cfg(small_csv), folds=3)
    assert len(res.folds) == 3 and sum(r["n_test"] for r in res.folds) == 60
    assert res.final is not None
    s = res.summary
    assert 0 <= s["test_error_mean"] <= 1 and s["all_optimal"] in (True, False)
    json.dumps(s)


def test_sweep_range_and_endpoints(small_csv):
    lo, hi = meaningful_c0_range(60, 3)
    rows = sweep_regularization(_cfg(small_csv), [lo, hi], None)
    assert rows[0]["model_size"] >= rows[1]["model_size"] == 0
    with pytest.raises(ConfigError, match="outside"):
        sweep_regularization(_cfg(small_csv), [5.0])
    assert sweep_regularization(_cfg(small_csv), []) == []

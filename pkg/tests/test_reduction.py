import numpy as np
import pytest

from discreteclf import InterpretabilitySet, OperationalConstraints, brute_force, build_mofn, build_slim, binarize
from discreteclf.reduction import (
    LevelSetCertificate,
    ReductionConfig,
    ReductionError,
    check_level_set_certificate,
    epsilon_from_feasible,
    reduce,
    relaxation_optimum,
)

from conftest import random_instance


def _instance(seed, large=False):
    rng = np.random.default_rng(seed)
    if large:
        ds = random_instance(rng, n_lo=40, n_hi=80, p_hi=2, noisy_rule=True)
    else:
        ds = random_instance(rng, n_lo=15, n_hi=30, p_hi=3, noisy_rule=True)
    C0 = float(rng.uniform(0.2, 1.0)) / (ds.N * ds.P)
    L = InterpretabilitySet.bounded(ds.P, 2)
    return ds, L, C0, build_slim(ds, L, C0=C0)


def test_certificate_examples():
    ok = check_level_set_certificate(LevelSetCertificate(1.0, 1.0, 0.1, 0.3))
    assert ok.satisfied and ok.epsilon == pytest.approx(0.1)
    bad = check_level_set_certificate(LevelSetCertificate(2.0, 1.0, 0.2, 0.5))
    assert not bad.satisfied and bad.epsilon == pytest.approx(0.4)
    edge = check_level_set_certificate(LevelSetCertificate(1.0, 1.0, 0.25, 0.5))
    assert not edge.satisfied
    with pytest.raises(ReductionError):
        LevelSetCertificate(0.0, 1.0, 1.0, 1.0)


def test_epsilon_from_feasible():
    assert epsilon_from_feasible(1.0, 0.25) == 0.75
    assert epsilon_from_feasible(0.5, 0.5) == 0.0
    with pytest.raises(ReductionError):
        epsilon_from_feasible(0.1, 0.5)


def test_config_validation():
    with pytest.raises(ReductionError):
        ReductionConfig(-1.0)
    with pytest.raises(ReductionError):
        ReductionConfig(0.1, proxy="supplied-convex-loss")


def test_huge_width_removes_nothing():
    ds, L, C0, ip = _instance(0)
    assert reduce(ip, ds, ReductionConfig(1e9)).removed.size == 0


def test_nesting_over_widths():
    ds, L, C0, ip = _instance(1)
    res = reduce(ip, ds, ReductionConfig(0.0))
    prev = None
    for w in np.linspace(0.0, 0.5, 10):
        cur = set(reduce(ip, ds, ReductionConfig(float(w))).removed.tolist())
        assert cur == set(res.removed_at(float(w)).tolist())
        if prev is not None:
            assert cur <= prev
        prev = cur


# seeds chosen so that the certified width does remove examples
@pytest.mark.parametrize("seed,large", [(39, False), (10, True), (11, True), (0, False)])
def test_reduced_problem_keeps_argmin(seed, large):
    ds, L, C0, ip = _instance(seed, large)
    full = brute_force(ip)
    eps = epsilon_from_feasible(full.objective, relaxation_optimum(ip))
    red = reduce(ip, ds, ReductionConfig(eps))
    assert red.dataset.denominator == ds.N
    assert red.removed.size > 0 or seed == 0
    ip2 = build_slim(red.dataset, L, C0=C0, l1_tiebreak_weight=ip.l1_tiebreak_weight, margin=ip.big_m.margin)
    small = brute_force(ip2)
    assert {tuple(a) for a in full.argmin} == {tuple(a) for a in small.argmin}
    for a in full.argmin:
        pred = np.where(ds.X[red.removed] @ a >= 0, 1, -1)
        assert np.array_equal(pred, red.fixed_labels[red.removed])


def test_width_removing_everything_is_refused():
    # on this instance a zero width (below any valid width) fixes every label
    ds, L, C0, ip = _instance(6)
    assert reduce(ip, ds, ReductionConfig(1.0)).removed_at(0.0).size == ds.N
    with pytest.raises(ReductionError, match="removes every example"):
        reduce(ip, ds, ReductionConfig(0.0))


def test_rate_constraints_refused():
    ds, L, C0, _ = _instance(2)
    ip = build_slim(ds, L, C0=C0, ops=OperationalConstraints(max_fpr=0.3))
    with pytest.raises(ReductionError):
        reduce(ip, ds, ReductionConfig(0.1))


def test_mofn_programs_supported():
    ds, L, C0, _ = _instance(3)
    rules, _ = binarize(ds)
    ip = build_mofn(rules, 0.01)
    res = reduce(ip, rules, ReductionConfig(0.05))
    assert res.kept.size + res.removed.size == rules.N


def test_report_csv(tmp_path):
    ds, L, C0, ip = _instance(4)
    res = reduce(ip, ds, ReductionConfig(0.01))
    res.to_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "index,baseline_label,variant_objective,removed"
    assert len(lines) == ds.N + 1


def test_reduced_optimum_can_mislabel_removed_examples():
    # dropping examples lowers the objective of models that mislabel them, so
    # the reduced argmin can differ; the fixed-label check tells the cases apart
    ds, L, C0, ip = _instance(81, large=True)
    full = brute_force(ip)
    red = reduce(ip, ds, ReductionConfig(epsilon_from_feasible(full.objective, relaxation_optimum(ip))))
    small = brute_force(build_slim(red.dataset, L, C0=C0, l1_tiebreak_weight=ip.l1_tiebreak_weight))
    full_set = {tuple(a) for a in full.argmin}
    assert full_set != {tuple(a) for a in small.argmin}
    for a in small.argmin:
        assert red.agrees(ds.X, a) == (tuple(a) in full_set)
    assert all(red.agrees(ds.X, a) for a in full.argmin)


def test_training_falls_back_when_reduced_optimum_disagrees(tmp_path):
    from discreteclf.training import train

    ds, L, C0, ip = _instance(81, large=True)
    rows = ["x,y"] + [f"{int(x)},{int(t)}" for x, t in zip(ds.X[:, 1], ds.y)]
    (tmp_path / "d.csv").write_text("\n".join(rows) + "\n")
    (tmp_path / "s.yaml").write_text("label: y\n")
    full = brute_force(ip)
    eps = epsilon_from_feasible(full.objective, relaxation_optimum(ip))
    cfg = {
        "data": str(tmp_path / "d.csv"),
        "schema": str(tmp_path / "s.yaml"),
        "C0": C0,
        "normalize": False,
        "coefficients": {"bound": 2, "intercept_bound": 2},
        "reduction": {"enabled": True, "level_set_width": eps},
    }
    model = train(cfg).model
    assert model.solve["reduction_fallback"] is True
    assert model.solve["reduced_examples"] > 0
    assert any(np.array_equal(model.coefficients, a) for a in full.argmin)

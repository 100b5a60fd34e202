import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from discreteclf.cli import main


@pytest.fixture
def setup(tmp_path):
    rng = np.random.default_rng(3)
    N = 40
    a = rng.integers(0, 4, N)
    b = rng.integers(0, 4, N)
    y = np.where(a - b + rng.normal(0, 0.7, N) >= 0, 1, -1)
    (tmp_path / "d.csv").write_text("a,b,y\n" + "".join(f"{a[i]},{b[i]},{y[i]}\n" for i in range(N)))
    (tmp_path / "d.schema.yaml").write_text(yaml.safe_dump({"label": "y"}))
    cfg = {"data": "d.csv", "schema": "d.schema.yaml", "C0": 0.01, "coefficients": {"bound": 2, "intercept_bound": 10}}
    (tmp_path / "run.yaml").write_text(yaml.safe_dump(cfg))
    return tmp_path


def test_train_writes_outputs(setup, capsys):
    out = setup / "out"
    assert main(["train", "--config", str(setup / "run.yaml"), "--out-dir", str(out)]) == 0
    for name in ("model.json", "metrics.csv", "model.txt"):
        assert (out / name).exists()
    assert "status: optimal" in capsys.readouterr().out
    assert main(["render", "--model", str(out / "model.json"), "--format", "score-function"]) == 0


def test_train_benders_and_reduction(setup):
    out = setup / "b"
    assert main(["train", "--config", str(setup / "run.yaml"), "--out-dir", str(out)]) == 0
    doc = yaml.safe_load((setup / "run.yaml").read_text())
    doc["benders"] = {"enabled": True}
    (setup / "b.yaml").write_text(yaml.safe_dump(doc))
    assert main(["train", "--config", str(setup / "b.yaml"), "--out-dir", str(out)]) == 0
    assert (out / "benders_trace.csv").read_text().startswith("k,LB,UB,gap")
    assert main(["reduce", "--config", str(setup / "run.yaml"), "--out-dir", str(out)]) == 0
    assert (out / "reduction_report.csv").exists()


def test_cv_and_sweep(setup):
    out = setup / "cv"
    assert main(["cv", "--config", str(setup / "run.yaml"), "--folds", "2", "--out-dir", str(out)]) == 0
    summary = json.loads((out / "cv_summary.json").read_text())
    assert summary["folds"] == 2
    assert main(["sweep", "--config", str(setup / "run.yaml"), "--grid", "3", "--out-dir", str(out)]) == 0
    assert len((out / "path.csv").read_text().strip().splitlines()) == 4


def test_exit_codes(setup, capsys):
    assert main(["train", "--data", str(setup / "nope.csv"), "--out-dir", str(setup)]) == 2
    assert "invalid input" in capsys.readouterr().err
    doc = yaml.safe_load((setup / "run.yaml").read_text())
    doc["constraints"] = {"max_model_size": 0, "max_fpr": 0.0, "max_fnr": 0.0}
    (setup / "inf.yaml").write_text(yaml.safe_dump(doc))
    assert main(["train", "--config", str(setup / "inf.yaml"), "--out-dir", str(setup)]) == 3
    doc = {"bogus": 1}
    (setup / "bad.yaml").write_text(yaml.safe_dump(doc))
    assert main(["train", "--config", str(setup / "bad.yaml")]) == 2
    assert main(["render", "--model", str(setup / "d.csv")]) == 2


def test_bounds(setup, capsys):
    assert main(["bounds", "density", "--P", "2", "--Lambda", "1", "--out-dir", str(setup)]) == 0
    assert (setup / "density.csv").exists()
    assert main(["bounds", "l0-count", "--P", "3", "--Lambda", "2", "--C0", "0.5"]) == 0
    assert "count=" in capsys.readouterr().out
    assert main(["bounds", "occam", "--count", "100", "--N", "1000"]) == 0
    assert main(["bounds", "occam"]) == 2
    assert main(["bounds", "resolution", "--data", str(setup / "d.csv"), "--schema", str(setup / "d.schema.yaml"),
                 "--rho", "1", "-1"]) == 0


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "discreteclf", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "discreteclf" in r.stdout

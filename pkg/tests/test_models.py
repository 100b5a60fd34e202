import numpy as np
import pytest

from discreteclf import TrainedModel, binarize, dataset_from_arrays, render
from discreteclf.models import classification_metrics


def _slim_model():
    names = ("ClumpThickness", "UniformityOfCellSize", "BareNuclei")
    return TrainedModel("slim", names, [-17, 0, 4, 2], positive_label="malignant", negative_label="benign")


def test_metrics_tie_is_positive():
    X = np.array([[1.0, 1.0], [1.0, -1.0], [1.0, 0.0]])
    m = classification_metrics([0.0, 1.0], X, np.array([1, -1, -1]))
    # the third example scores 0, which predicts +1
    assert m["error"] == pytest.approx(1 / 3) and m["fpr"] == pytest.approx(0.5) and m["tpr"] == 1.0


def test_scoring_table():
    text = render(_slim_model(), "scoring-table")
    lines = text.splitlines()
    assert lines[0] == "PREDICT malignant IF SCORE >= 17"
    assert "UniformityOfCellSize" in lines[2] and "4 points" in lines[2]
    assert "BareNuclei" in lines[3] and "2 points" in lines[3]
    assert "ClumpThickness" not in text
    bars = {ln.find("|") for ln in lines if "|" in ln}
    assert len(bars) == 1  # the score column lines up
    assert "below 17 predicts benign" in text


def test_score_function_and_json():
    m = _slim_model()
    sf = render(m, "score-function")
    assert "4·UniformityOfCellSize" in sf and "2·BareNuclei" in sf and "-17" in sf
    assert TrainedModel.from_json(render(m, "machine-readable")) == m


def test_round_trip(tmp_path):
    m = _slim_model()
    m.save(tmp_path / "m.json")
    back = TrainedModel.load(tmp_path / "m.json")
    assert back == m and np.array_equal(back.coefficients, m.coefficients)
    assert back.to_json() == m.to_json()


def test_zero_model_renders_constant():
    m = TrainedModel("slim", ("a", "b"), [0, 0, 0], positive_label="yes", negative_label="no")
    assert "PREDICT yes FOR EVERY EXAMPLE" in render(m)
    m = TrainedModel("slim", ("a", "b"), [-1, 0, 0], positive_label="yes", negative_label="no")
    assert "PREDICT no FOR EVERY EXAMPLE" in render(m)


def test_mofn_table_and_prediction():
    X = np.array([[1, 4, 0], [5, 5, 1], [2, 9, 1], [7, 1, 0]], float)
    raw = dataset_from_arrays(X, [1, 1, -1, -1], feature_names=["a", "b", "c"], kinds=["real", "real", "binary"])
    rules, rs = binarize(raw, "domain", [3])
    coef = np.zeros(rules.P + 1)
    coef[0] = -2
    coef[1:] = 1
    m = TrainedModel("mofn", rules.feature_names, coef, raw.feature_names, rs, positive_label="P", negative_label="N")
    text = render(m, "mofn-table")
    assert text.splitlines()[0] == f"PREDICT P IF AT LEAST 2 OF THE FOLLOWING {rules.P} RULES ARE TRUE"
    # at least 2 of {a >= 3, b >= 3, c} hold
    expected = np.where((X[:, 0] >= 3).astype(int) + (X[:, 1] >= 3) + X[:, 2] >= 2, 1, -1)
    assert np.array_equal(m.predict(raw), expected)


def test_mofn_format_rejects_non_unit():
    m = TrainedModel("mofn", ("a",), [-1, 2])
    with pytest.raises(ValueError):
        render(m, "mofn-table")


def test_bad_inputs():
    with pytest.raises(ValueError):
        TrainedModel("forest", ("a",), [0, 1])
    with pytest.raises(ValueError):
        TrainedModel("slim", ("a",), [0])
    with pytest.raises(ValueError):
        render(_slim_model(), "pdf")

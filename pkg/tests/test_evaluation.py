import json

import numpy as np
import pytest

from hiercp.conformal import Prediction
from hiercp.evaluation import (
    REPORT_COLUMNS,
    average_complexity,
    average_size,
    coverage,
    generate_synthetic,
    oracle_check,
    run_benchmark,
)

from conftest import cls


def test_metrics_on_singletons(tree8):
    labels = [0, 3, 5]
    preds = [(y,) for y in labels]
    assert coverage(preds, labels) == 1.0
    assert average_size(preds) == 1.0
    assert average_complexity(tree8, preds) == 1.0


def test_metrics_mixed(tree8):
    preds = [Prediction(tuple(cls(tree8, 1, 2)), ()), Prediction((), ()), (tuple(cls(tree8, 1, 3, 5, 7)))]
    labels = cls(tree8, 2, 1, 8)
    assert coverage(preds, labels) == pytest.approx(1 / 3)
    assert average_size(preds) == 2.0
    assert average_complexity(tree8, preds) == pytest.approx(5 / 3)
    with pytest.raises(ValueError):
        coverage(preds, labels[:2])
    with pytest.raises(ValueError):
        average_size([])


def test_synthetic_is_deterministic():
    a = generate_synthetic(16, 2, 300, 0.5, seed=4)
    b = generate_synthetic(16, 2, 300, 0.5, seed=4)
    assert np.array_equal(a.probs, b.probs) and np.array_equal(a.labels, b.labels)
    assert a.hierarchy.K == 16
    assert np.allclose(a.probs.sum(axis=1), 1.0)
    assert np.all(a.probs[np.arange(300), a.labels] > 0)
    assert not np.array_equal(a.labels, generate_synthetic(16, 2, 300, 0.5, seed=5).labels)


def test_benchmark_small():
    data = generate_synthetic(16, 2, 400, 0.3, seed=1)
    methods = ["crsvp", "ncrsvp", "crsvp-2", "aps", "nps", "lac"]
    rep = run_benchmark(data, methods, alpha=0.2, resamples=5, seed=2)
    assert rep.n_cal == 200 and rep.n_test == 200
    rows = {r["method"]: r for r in rep.rows()}
    assert list(rows) == methods
    for m in methods:
        assert 0.5 < rows[m]["coverage"] <= 1.0
        assert len(rep[m].coverage) == 5
    assert rows["ncrsvp"]["coverage"] >= rows["crsvp"]["coverage"]
    assert rows["nps"]["coverage"] >= rows["aps"]["coverage"]
    assert rep["crsvp"].max_complexity <= 1
    assert rep["crsvp-2"].max_complexity <= 2
    lines = rep.to_csv().splitlines()
    assert lines[0] == ",".join(REPORT_COLUMNS) and len(lines) == 7
    assert json.loads(rep.to_json())["resamples"] == 5
    again = run_benchmark(data, methods, alpha=0.2, resamples=5, seed=2)
    assert again.to_csv() == rep.to_csv()


def test_benchmark_split_errors():
    data = generate_synthetic(8, 2, 10, 1.0, seed=0)
    with pytest.raises(ValueError):
        run_benchmark(data, ["aps"], n_cal=10)


def test_oracle_check_small():
    rep = oracle_check(6, 10, r_max=3, seed=1)
    assert rep.matches == rep.trials == 10
    assert not rep.mismatches

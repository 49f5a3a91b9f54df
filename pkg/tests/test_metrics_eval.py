import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from neuragen.dataset_store import DataRow, stratified_kfold
from neuragen.errors import EmptyEvaluation
from neuragen.evaluation import cross_validate, emit_curves, fold_seed
from neuragen.fusion import FeatureVector
from neuragen.metrics import ConfusionMatrix, compute_metrics, f1_score
from neuragen.neural_net import TrainConfig, train


def test_metrics_example():
    m = compute_metrics(ConfusionMatrix(tp=3, fp=1, fn=2, tn=4))
    assert m.accuracy == pytest.approx(0.7)
    assert m.precision == pytest.approx(0.75)
    assert m.recall == pytest.approx(0.6)
    assert m.f1 == pytest.approx(0.6667, abs=5e-5)
    assert not m.degenerate


def test_all_correct():
    m = compute_metrics(ConfusionMatrix(tp=5, fp=0, fn=0, tn=5))
    assert (m.accuracy, m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0, 1.0)


def test_no_positive_predictions_flagged():
    m = compute_metrics(ConfusionMatrix(tp=0, fp=0, fn=3, tn=7))
    assert m.precision == 0.0 and m.f1 == 0.0 and m.degenerate


def test_empty_evaluation():
    with pytest.raises(EmptyEvaluation):
        compute_metrics(ConfusionMatrix(0, 0, 0, 0))


def test_from_predictions():
    cm = ConfusionMatrix.from_predictions([1, 1, 0, 0, 1], [1, 0, 1, 0, 1])
    assert cm == ConfusionMatrix(tp=2, fp=1, fn=1, tn=1)


counts = st.integers(0, 500)


@settings(max_examples=300)
@given(counts, counts, counts, counts)
def test_metric_identities(tp, fp, fn, tn):
    cm = ConfusionMatrix(tp, fp, fn, tn)
    if cm.total == 0:
        return
    m = compute_metrics(cm)
    assert m.accuracy == pytest.approx(1 - (fp + fn) / cm.total, abs=1e-15)
    for v in (m.accuracy, m.precision, m.recall, m.f1):
        assert 0.0 <= v <= 1.0
    if tp > 0:
        assert m.f1 == pytest.approx(2 * tp / (2 * tp + fp + fn), rel=1e-12)
        assert min(m.precision, m.recall) - 1e-12 <= m.f1 <= max(m.precision, m.recall) + 1e-12


def test_f1_helper():
    assert f1_score(0.0, 0.0) == (0.0, True)
    assert f1_score(1.0, 0.5)[0] == pytest.approx(2 / 3)


# ---------------------------------------------------------------- cross-validation


def gaussian_rows(n_per_class, sigma, sep, seed=0):
    rng = np.random.default_rng(seed)
    rows = []
    for label, center in ((0, -sep / 2), (1, sep / 2)):
        for v in rng.normal(center, sigma, size=(n_per_class, 27)):
            rows.append(DataRow.make(len(rows), FeatureVector(v), "F" if label else "M"))
    return rows


@pytest.fixture(scope="module")
def blobs():
    return gaussian_rows(40, 1.0, 1.0)


def test_separable_classes():
    rows = gaussian_rows(200, 0.1, 2.0, seed=1)
    report = cross_validate(rows, 5, TrainConfig(epochs=30), seed=0)
    assert report.aggregate["validation"]["accuracy"] >= 0.99


@pytest.mark.parametrize("k", [5, 10, 20])
def test_fold_counts(blobs, k):
    report = cross_validate(blobs, k, TrainConfig(epochs=2), seed=0)
    assert len(report.folds) == k
    assert sum(f.n_validation for f in report.folds) == len(blobs)
    agg = report.aggregate["validation"]
    for m in ("accuracy", "precision", "recall", "f1"):
        vals = [f.validation[m] for f in report.folds]
        assert min(vals) - 1e-12 <= agg[m] <= max(vals) + 1e-12


def test_k_bounds(blobs):
    with pytest.raises(ValueError):
        cross_validate(blobs, 1, TrainConfig(epochs=1))
    with pytest.raises(ValueError):
        cross_validate(blobs, len(blobs) // 2 + 1, TrainConfig(epochs=1))


def test_single_split(blobs):
    report = cross_validate(blobs, 5, TrainConfig(epochs=2), seed=3, single_split=True)
    assert len(report.folds) == 1 and report.folds[0].fold == 0
    assert report.folds[0].n_validation == 16


def test_per_fold_seeds_distinct():
    seeds = {fold_seed(0, f) for f in range(20)}
    assert len(seeds) == 20 and fold_seed(0, 3) == fold_seed(0, 3)


def test_report_reproducible(blobs):
    cfg = TrainConfig(epochs=5)
    a = cross_validate(blobs, 4, cfg, seed=11)
    b = cross_validate(blobs, 4, cfg, seed=11)
    assert a.to_json() == b.to_json()


def test_parallel_matches_serial(blobs):
    cfg = TrainConfig(epochs=5)
    serial = cross_validate(blobs, 4, cfg, seed=2)
    parallel = cross_validate(blobs, 4, cfg, seed=2, workers=2)
    assert serial.to_json() == parallel.to_json()


def test_curves_file(blobs, tmp_path):
    plan = stratified_kfold(blobs, 4, 0)
    model = train(blobs, TrainConfig(epochs=500), plan.train_indices(0), plan.validation_indices(0))
    path = tmp_path / "curves.csv"
    emit_curves(model, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,split,loss,accuracy,precision,recall"
    assert len(lines) - 1 == 1000
    assert lines[1].startswith("1,train,") and lines[2].startswith("1,validation,")
    assert lines[-1].startswith("500,validation,")


def test_curves_files_from_report(blobs, tmp_path):
    report = cross_validate(blobs, 4, TrainConfig(epochs=3), seed=0)
    paths = report.write_curves(tmp_path)
    assert [p.name for p in paths] == [f"curves_fold{i}.csv" for i in range(4)]
    assert all(len(p.read_text().splitlines()) == 7 for p in paths)


def test_table_layout():
    rows = gaussian_rows(10, 1.0, 0.0)
    report = cross_validate(rows, 5, TrainConfig(epochs=1), seed=0)
    text = report.format_table()
    assert "5-fold" in text and "mean" in text

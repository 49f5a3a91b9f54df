import csv
import json

import numpy as np
import pytest

from neuragen.audio_io import read_wav
from neuragen.cli import main
from neuragen.dataset_store import load_dataset
from neuragen.features import estimate_f0
from neuragen.manifest import file_sha256, sidecar_path
from neuragen.synth import F0_BANDS


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    assert main(["synth", "--out", str(d), "--per-class", "6", "--seed", "1", "--duration", "0.5"]) == 0
    return d


@pytest.fixture(scope="module")
def features(corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("feat") / "features.csv"
    assert main(["extract", str(corpus), "--out", str(out)]) == 0
    return out


@pytest.fixture(scope="module")
def trained(features, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    args = ["train", str(features), "--out-dir", str(out), "--folds", "3", "--epochs", "40", "--seed", "7"]
    assert main(args) == 0
    return out


def test_synth_writes_clips_and_manifest(corpus):
    wavs = sorted(p.name for p in corpus.glob("*.wav"))
    assert len(wavs) == 12
    with open(corpus / "labels.csv") as fh:
        recs = list(csv.DictReader(fh))
    assert sorted(r["file"] for r in recs) == wavs


def test_synth_f0_in_band(corpus):
    with open(corpus / "labels.csv") as fh:
        for r in csv.DictReader(fh):
            lo, hi = F0_BANDS[r["gender"]]
            assert lo <= float(r["f0_hz"]) <= hi
            measured = np.median(estimate_f0(read_wav(corpus / r["file"])))
            assert measured == pytest.approx(float(r["f0_hz"]), rel=0.02)


def test_synth_byte_identical(tmp_path):
    for name in ("a", "b"):
        main(["synth", "--out", str(tmp_path / name), "--per-class", "2", "--seed", "3", "--duration", "0.3"])
    for p in (tmp_path / "a").iterdir():
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()


def test_extract_rows_and_sidecar(features):
    rows = load_dataset(features)
    assert len(rows) == 12
    assert sum(r.label for r in rows) == 6
    side = json.loads(sidecar_path(features).read_text())
    assert side["command"] == "extract"
    assert side["outputs"][0]["sha256"] == file_sha256(features)
    assert side["dsp_config"]["frame_length"] == 2048


def test_extract_partial_failure(tmp_path, capsys):
    d = tmp_path / "c"
    main(["synth", "--out", str(d), "--per-class", "5", "--seed", "2", "--duration", "0.3"])
    (d / "F_0003.wav").write_bytes(b"RIFF\x10\x00\x00\x00WAVEjunk")
    out = tmp_path / "f.csv"
    assert main(["extract", str(d), "--out", str(out)]) == 3
    assert len(load_dataset(out)) == 9
    assert "F_0003.wav" in capsys.readouterr().err
    failures = json.loads(sidecar_path(out).read_text())["extra"]["failures"]
    assert [f["file"] for f in failures] == ["F_0003.wav"]


def test_extract_prefix_fallback(tmp_path, corpus):
    d = tmp_path / "nolabels"
    d.mkdir()
    for p in list(corpus.glob("*_000[01].wav")):
        (d / p.name).write_bytes(p.read_bytes())
    out = tmp_path / "f.csv"
    assert main(["extract", str(d), "--out", str(out)]) == 0
    assert sorted(r.label_raw for r in load_dataset(out)) == ["F", "F", "M", "M"]


def test_extract_empty_directory(tmp_path):
    assert main(["extract", str(tmp_path), "--out", str(tmp_path / "x.csv")]) == 2


def test_train_outputs(trained):
    report = json.loads((trained / "report.json").read_text())
    assert report["k"] == 3 and len(report["folds"]) == 3
    assert report["train_config"]["epochs"] == 40
    assert sorted(p.name for p in (trained / "curves").iterdir()) == [f"curves_fold{i}.csv" for i in range(3)]
    run = json.loads((trained / "run_manifest.json").read_text())
    for out in run["outputs"]:
        assert file_sha256(out["path"]) == out["sha256"]
    assert (trained / "model.json").is_file()


def test_evaluate_writes_no_model(features, tmp_path):
    assert main(["evaluate", str(features), "--out-dir", str(tmp_path), "--folds", "3", "--epochs", "2", "--single-split"]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert len(report["folds"]) == 1
    assert not (tmp_path / "model.json").exists()


def test_default_epochs():
    from neuragen.cli import build_parser

    args = build_parser().parse_args(["train", "f.csv", "--out-dir", "o"])
    assert args.epochs == 500 and args.folds == 20


def test_missing_features_file(tmp_path, capsys):
    assert main(["evaluate", str(tmp_path / "nope.csv"), "--out-dir", str(tmp_path)]) == 2
    assert "nope.csv" in capsys.readouterr().err


def test_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["train"])
    assert exc.value.code == 1


def test_predict_lines(trained, corpus, capsys):
    wavs = [str(corpus / "F_0000.wav"), str(corpus / "M_0000.wav")]
    assert main(["predict", "--model", str(trained / "model.json"), *wavs]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2
    for line, stem in zip(lines, ("F_0000", "M_0000")):
        sid, prob, label = line.split(",")
        assert sid == stem
        assert 0.0 <= float(prob) <= 1.0
        assert label == ("female" if float(prob) >= 0.5 else "male")


def test_predict_rejects_mismatched_model(trained, corpus, tmp_path):
    doc = json.loads((trained / "model.json").read_text())
    doc["weights"][0] = doc["weights"][0][:100]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["predict", "--model", str(bad), str(corpus / "F_0000.wav")]) == 2


def test_seed_env_fallback(monkeypatch):
    from neuragen.cli import build_parser

    monkeypatch.setenv("NEURAGEN_SEED", "42")
    assert build_parser().parse_args(["synth", "--out", "x"]).seed == 42
    monkeypatch.delenv("NEURAGEN_SEED")
    assert build_parser().parse_args(["synth", "--out", "x"]).seed == 0

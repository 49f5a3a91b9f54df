"""Command-line front end: synth | extract | train | evaluate | predict.

Exit status: 0 success, 1 usage error, 2 data error, 3 partial extraction.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .audio_io import read_wav
from .dataset_store import DataRow, dataset_hash, load_dataset, save_features
from .errors import DataError, NeuraGenError
from .evaluation import cross_validate, emit_curves
from .features import DspConfig, extract_frame_features
from .fusion import fuse_features
from .manifest import RunManifest, file_sha256, sidecar_path
from .neural_net import TrainConfig, TrainedModel, predict, train
from .synth import LABELS_FILE, generate_corpus

log = logging.getLogger("neuragen")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_PARTIAL = 0, 1, 2, 3
GENDER_NAMES = {0: "male", 1: "female"}


class NoInputFiles(DataError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _default_seed() -> int:
    env = os.environ.get("NEURAGEN_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise SystemExit(f"NEURAGEN_SEED must be an integer, got {env!r}") from None


# ---------------------------------------------------------------- synth


def cmd_synth(args) -> int:
    specs = generate_corpus(args.out, args.per_class, args.seed, args.sample_rate, args.duration)
    print(f"wrote {len(specs)} clips and {LABELS_FILE} to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------- extract


def read_label_manifest(path) -> dict:
    """Map file name (and stem) to gender string from a CSV with ``file,gender`` columns."""
    labels = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames or "file" not in reader.fieldnames or "gender" not in reader.fieldnames:
            raise DataError(f"{path}: label manifest needs 'file' and 'gender' columns")
        for rec in reader:
            name = rec["file"].strip()
            labels[name] = rec["gender"]
            labels[Path(name).stem] = rec["gender"]
    return labels


def prefix_label(path: Path):
    head = path.name.split("_", 1)[0].upper()
    return head if head in ("M", "F") else None


def _extract_one(job):
    path, cfg = job
    try:
        vec = fuse_features(extract_frame_features(read_wav(path), cfg))
        return path, vec, None
    except (NeuraGenError, OSError, ValueError) as exc:
        return path, None, f"{type(exc).__name__}: {exc}"


def cmd_extract(args) -> int:
    in_dir = Path(args.input)
    wavs = sorted(p for p in in_dir.iterdir() if p.suffix.lower() == ".wav") if in_dir.is_dir() else []
    if not wavs:
        raise NoInputFiles(f"no .wav files found in {in_dir}")

    label_path = Path(args.labels) if args.labels else in_dir / LABELS_FILE
    labels = read_label_manifest(label_path) if label_path.exists() else {}
    cfg = DspConfig(
        frame_length=args.frame_length,
        hop_length=args.hop_length,
        n_mels=args.n_mels,
        f0_min=args.f0_min,
        f0_max=args.f0_max,
    )

    jobs = [(p, cfg) for p in wavs]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_extract_one, jobs))
    else:
        results = [_extract_one(j) for j in jobs]

    rows, failures, sources = [], [], []
    for path, vec, err in results:
        raw = labels.get(path.name, labels.get(path.stem)) or prefix_label(path)
        if err is None and raw is None:
            err = "no gender label (not in manifest, no M_/F_ prefix)"
        if err is None:
            try:
                rows.append(DataRow.make(len(rows), vec, raw))
            except DataError as exc:
                err = f"{type(exc).__name__}: {exc}"
        if err is not None:
            failures.append({"file": path.name, "error": err})
            log.warning("%s: %s", path.name, err)
            continue
        sources.append({"idx": rows[-1].index, "source_id": vec.source_id, "unvoiced": vec.unvoiced})

    if not rows:
        raise DataError(f"all {len(wavs)} files failed to extract")
    save_features(rows, args.out)
    manifest = RunManifest(
        command="extract",
        dsp_config=cfg.to_dict(),
        inputs=[str(in_dir)] + ([str(label_path)] if label_path.exists() else []),
        outputs=[{"path": str(args.out), "sha256": file_sha256(args.out)}],
        dataset_hash=dataset_hash(rows),
        extra={"sources": sources, "failures": failures},
    )
    manifest.write(sidecar_path(args.out))
    print(f"extracted {len(rows)} of {len(wavs)} files -> {args.out}")
    for f in failures:
        print(f"  failed: {f['file']}: {f['error']}", file=sys.stderr)
    return EXIT_PARTIAL if failures else EXIT_OK


# ---------------------------------------------------------------- train / evaluate


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        seed=args.seed,
        dropout=not args.no_dropout,
    )


def _run_cv(args, command: str) -> int:
    features = Path(args.features)
    if not features.is_file():
        raise DataError(f"features file not found: {features}")
    rows = load_dataset(features)
    cfg = _train_config(args)
    dsp = None
    if sidecar_path(features).is_file():
        dsp = json.loads(sidecar_path(features).read_text(encoding="utf-8")).get("dsp_config")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    report = cross_validate(
        rows,
        args.folds,
        cfg,
        seed=args.seed,
        scaler_mode=args.scaler,
        stratify=not args.unstratified,
        single_split=args.single_split,
        workers=args.jobs,
    )
    manifest = RunManifest(
        command=command,
        seed=args.seed,
        dsp_config=dsp,
        train_config=cfg.to_dict(),
        scaler_mode=args.scaler,
        inputs=[{"path": str(features), "sha256": file_sha256(features)}],
        dataset_hash=dataset_hash(rows),
        extra={"folds": args.folds, "single_split": args.single_split, "stratified": not args.unstratified},
    )
    report.manifest = manifest.to_dict()
    outputs = report.write_curves(out / "curves")
    (out / "report.json").write_text(report.to_json(), encoding="utf-8")
    (out / "report.txt").write_text(report.format_table() + "\n", encoding="utf-8")
    outputs += [out / "report.json", out / "report.txt"]
    print(report.format_table())

    if command == "train":
        model = train(rows, cfg, scaler_mode=args.scaler)
        model.manifest.update(manifest.to_dict())
        model.save(out / "model.json")
        emit_curves(model, out / "model_curves.csv")
        outputs += [out / "model.json", out / "model_curves.csv"]
        print(f"model written to {out / 'model.json'}")

    manifest.outputs = [{"path": str(p), "sha256": file_sha256(p)} for p in outputs]
    manifest.write(out / "run_manifest.json")
    return EXIT_OK


def cmd_train(args) -> int:
    return _run_cv(args, "train")


def cmd_evaluate(args) -> int:
    return _run_cv(args, "evaluate")


# ---------------------------------------------------------------- predict


def cmd_predict(args) -> int:
    model = TrainedModel.load(args.model)
    cfg = DspConfig(**model.manifest["dsp_config"]) if model.manifest.get("dsp_config") else DspConfig()
    status = EXIT_OK
    for wav in args.wavs:
        try:
            vec = fuse_features(extract_frame_features(read_wav(wav), cfg))
        except (NeuraGenError, OSError) as exc:
            print(f"{wav}: {type(exc).__name__}: {exc}", file=sys.stderr)
            status = EXIT_DATA
            continue
        p, cls = predict(model, vec)
        print(f"{vec.source_id},{p:.6f},{GENDER_NAMES[cls]}")
    return status


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="neuragen", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    seed = _default_seed()

    s = sub.add_parser("synth", help="generate a synthetic labelled corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--per-class", type=int, default=100)
    s.add_argument("--seed", type=int, default=seed)
    s.add_argument("--sample-rate", type=int, default=16000)
    s.add_argument("--duration", type=float, default=1.0, help="seconds per clip")
    s.set_defaults(func=cmd_synth)

    e = sub.add_parser("extract", help="WAV directory -> features CSV")
    e.add_argument("input", help="directory of .wav files")
    e.add_argument("--out", required=True, help="features CSV to write")
    e.add_argument("--labels", help=f"CSV with file,gender columns (default: <input>/{LABELS_FILE}, then M_/F_ prefix)")
    e.add_argument("--jobs", type=int, default=1)
    d = DspConfig()
    e.add_argument("--frame-length", type=int, default=d.frame_length)
    e.add_argument("--hop-length", type=int, default=d.hop_length)
    e.add_argument("--n-mels", type=int, default=d.n_mels)
    e.add_argument("--f0-min", type=float, default=d.f0_min)
    e.add_argument("--f0-max", type=float, default=d.f0_max)
    e.set_defaults(func=cmd_extract)

    t = TrainConfig()
    for name, func, help_ in (
        ("train", cmd_train, "cross-validate, then fit a final model on all rows"),
        ("evaluate", cmd_evaluate, "cross-validate only"),
    ):
        c = sub.add_parser(name, help=help_)
        c.add_argument("features", help="features CSV from 'extract'")
        c.add_argument("--out-dir", required=True)
        c.add_argument("--folds", type=int, default=20, help="k for k-fold CV")
        c.add_argument("--epochs", type=int, default=t.epochs)
        c.add_argument("--batch-size", type=int, default=t.batch_size)
        c.add_argument("--learning-rate", type=float, default=t.learning_rate)
        c.add_argument("--seed", type=int, default=seed)
        c.add_argument("--scaler", choices=("train", "global"), default="train")
        c.add_argument("--single-split", action="store_true", help="validate on one fold only")
        c.add_argument("--unstratified", action="store_true")
        c.add_argument("--no-dropout", action="store_true")
        c.add_argument("--jobs", type=int, default=1, help="parallel fold workers")
        c.set_defaults(func=func)

    r = sub.add_parser("predict", help="classify WAV files with a trained model")
    r.add_argument("--model", required=True)
    r.add_argument("wavs", nargs="+")
    r.set_defaults(func=cmd_predict)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NeuraGenError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

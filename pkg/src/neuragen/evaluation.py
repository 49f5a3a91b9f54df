"""k-fold cross-validation driver, reports, and learning-curve files."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .dataset_store import DataRow, FoldPlan, feature_matrix, label_vector, stratified_kfold
from .metrics import ConfusionMatrix, compute_metrics
from .neural_net import CURVE_METRICS, TrainConfig, TrainedModel, bce_loss, train

REPORT_METRICS = ("accuracy", "loss", "precision", "recall", "f1")
CURVE_HEADER = ["epoch", "split", *CURVE_METRICS]


def evaluate_split(model: TrainedModel, rows: Sequence[DataRow], idx) -> dict:
    """Inference-mode metrics of ``model`` on ``rows[idx]``."""
    idx = np.asarray(idx, dtype=np.int64)
    x = feature_matrix(rows)[idx]
    y = label_vector(rows)[idx]
    p = model.predict_proba(x)
    m = compute_metrics(ConfusionMatrix.from_predictions(y, (p >= 0.5).astype(np.int64)))
    return {
        "accuracy": m.accuracy,
        "loss": float(np.mean(bce_loss(p, y))),
        "precision": m.precision,
        "recall": m.recall,
        "f1": m.f1,
        "degenerate": m.degenerate,
    }


@dataclass
class FoldResult:
    fold: int
    seed: int
    n_train: int
    n_validation: int
    train: dict
    validation: dict
    curves: dict = field(repr=False, default_factory=dict)


def _mean_metrics(results: Sequence[dict]) -> dict:
    return {m: float(np.mean([r[m] for r in results])) for m in REPORT_METRICS}


@dataclass
class EvalReport:
    k: int
    seed: int
    scaler_mode: str
    stratified: bool
    single_split: bool
    fold_assignments: list
    folds: list
    train_config: dict
    manifest: dict = field(default_factory=dict)

    @property
    def aggregate(self) -> dict:
        return {
            "train": _mean_metrics([f.train for f in self.folds]),
            "validation": _mean_metrics([f.validation for f in self.folds]),
        }

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "scaler_mode": self.scaler_mode,
            "stratified": self.stratified,
            "single_split": self.single_split,
            "train_config": self.train_config,
            "fold_assignments": self.fold_assignments,
            "folds": [{k: v for k, v in asdict(f).items() if k != "curves"} for f in self.folds],
            "aggregate": self.aggregate,
            "manifest": self.manifest,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    def format_table(self) -> str:
        head = f"{'fold':>5} {'n_val':>5}  " + "  ".join(f"{m:>9}" for m in REPORT_METRICS)
        lines = [f"{self.k}-fold cross-validation (seed {self.seed}, scaler {self.scaler_mode})", head]
        for f in self.folds:
            v = f.validation
            flag = " *" if v["degenerate"] else ""
            lines.append(f"{f.fold:>5} {f.n_validation:>5}  " + "  ".join(f"{v[m]:>9.4f}" for m in REPORT_METRICS) + flag)
        agg = self.aggregate
        for split in ("validation", "train"):
            lines.append(f"{'mean':>5} {split[:5]:>5}  " + "  ".join(f"{agg[split][m]:>9.4f}" for m in REPORT_METRICS))
        if any(f.validation["degenerate"] for f in self.folds):
            lines.append("* precision/recall/F1 had a 0/0 case, reported as 0")
        return "\n".join(lines)

    def write_curves(self, directory) -> list:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        width = len(str(self.k - 1))
        paths = []
        for f in self.folds:
            path = directory / f"curves_fold{f.fold:0{width}d}.csv"
            write_curve_csv(f.curves, path)
            paths.append(path)
        return paths


def write_curve_csv(curves: dict, path) -> None:
    n_epochs = len(curves["train"]["loss"])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CURVE_HEADER)
        for e in range(n_epochs):
            for split in ("train", "validation"):
                series = curves.get(split, {})
                if len(series.get("loss", ())) <= e:
                    continue
                w.writerow([e + 1, split, *(repr(float(series[m][e])) for m in CURVE_METRICS)])


def emit_curves(model: TrainedModel, path) -> None:
    """Write ``epoch,split,loss,accuracy,precision,recall`` rows for a trained model."""
    if not model.curves["train"]["loss"]:
        raise ValueError("model carries no curve data")
    write_curve_csv(model.curves, path)


def fold_seed(seed: int, fold: int) -> int:
    return int(np.random.SeedSequence([seed, fold]).generate_state(1)[0])


def _run_fold(args) -> FoldResult:
    rows, plan, fold, cfg, scaler_mode, scaler_method = args
    tr = plan.train_indices(fold)
    va = plan.validation_indices(fold)
    seed = fold_seed(plan.seed, fold)
    model = train(rows, replace(cfg, seed=seed), tr, va, scaler_mode, scaler_method)
    return FoldResult(
        fold=fold,
        seed=seed,
        n_train=int(tr.size),
        n_validation=int(va.size),
        train=evaluate_split(model, rows, tr),
        validation=evaluate_split(model, rows, va),
        curves=model.curves,
    )


def cross_validate(
    rows: Sequence[DataRow],
    k: int,
    train_cfg: TrainConfig = TrainConfig(),
    seed: int = 0,
    scaler_mode: str = "train",
    scaler_method: str = "zscore",
    stratify: bool = True,
    single_split: bool = False,
    workers: int = 1,
    plan: Optional[FoldPlan] = None,
) -> EvalReport:
    """Train on each k-1 folds, validate on the held-out fold.

    Each fold trains with a seed derived from ``(seed, fold)``, so serial and
    parallel execution give identical reports. ``single_split`` runs fold 0
    only (one (k-1)/k : 1/k split).
    """
    n = len(rows)
    if not 2 <= k <= n // 2:
        raise ValueError(f"k must be in [2, {n // 2}] for {n} rows, got {k}")
    plan = plan or stratified_kfold(rows, k, seed, stratify=stratify)
    fold_ids = [0] if single_split else list(range(k))
    jobs = [(rows, plan, i, train_cfg, scaler_mode, scaler_method) for i in fold_ids]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            folds = list(pool.map(_run_fold, jobs))
    else:
        folds = [_run_fold(j) for j in jobs]
    return EvalReport(
        k=k,
        seed=seed,
        scaler_mode=scaler_mode,
        stratified=plan.stratified,
        single_split=single_split,
        fold_assignments=plan.assignments.tolist(),
        folds=folds,
        train_config=train_cfg.to_dict(),
    )


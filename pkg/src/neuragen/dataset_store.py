"""CSV persistence of fused features, label encoding, and k-fold plans."""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import SchemaError, TooFewSamples, UnknownLabel
from .fusion import N_FEATURES, FeatureVector

MALE, FEMALE = 0, 1
_LABELS = {"m": MALE, "male": MALE, "f": FEMALE, "female": FEMALE}
HEADER = ["idx"] + [f"f{i}" for i in range(N_FEATURES)] + ["gender"]


def encode_label(raw: str) -> int:
    """'M'/'Male' -> 0, 'F'/'Female' -> 1 (trimmed, case-insensitive)."""
    try:
        return _LABELS[str(raw).strip().lower()]
    except KeyError:
        raise UnknownLabel(f"unrecognised gender label {raw!r}") from None


@dataclass(frozen=True)
class DataRow:
    index: int
    features: FeatureVector
    label_raw: str
    label: int

    @classmethod
    def make(cls, index: int, features: FeatureVector, label_raw: str) -> "DataRow":
        return cls(index, features, label_raw, encode_label(label_raw))


def feature_matrix(rows: Sequence[DataRow]) -> np.ndarray:
    return np.stack([r.features.values for r in rows]) if rows else np.empty((0, N_FEATURES))


def label_vector(rows: Sequence[DataRow]) -> np.ndarray:
    return np.array([r.label for r in rows], dtype=np.int64)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def save_features(rows: Sequence[DataRow], path) -> None:
    if not rows:
        raise ValueError("refusing to write an empty dataset")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(HEADER)
        for r in rows:
            writer.writerow([r.index, *(_fmt(v) for v in r.features.values), r.label_raw])


def load_dataset(path) -> list[DataRow]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file")
        if len(header) != len(HEADER):
            raise SchemaError(f"{path}: expected {len(HEADER)} columns, header has {len(header)}")
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(HEADER):
                raise SchemaError(f"{path}:{lineno}: expected {len(HEADER)} columns, got {len(rec)}")
            try:
                index = int(rec[0])
                values = [float(v) for v in rec[1:-1]]
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in values):
                raise SchemaError(f"{path}:{lineno}: non-finite feature value")
            rows.append(DataRow.make(index, FeatureVector(values, source_id=str(index)), rec[-1]))
    return rows


def dataset_hash(rows: Sequence[DataRow]) -> str:
    """SHA-256 over the exact feature bits and labels."""
    h = hashlib.sha256()
    for r in rows:
        h.update(np.ascontiguousarray(r.features.values, dtype="<f8").tobytes())
        h.update(bytes([r.label]))
    return h.hexdigest()


@dataclass(frozen=True, eq=False)
class FoldPlan:
    k: int
    seed: int
    assignments: np.ndarray  # fold id per row
    stratified: bool = True

    def __post_init__(self):
        a = np.array(self.assignments, dtype=np.int64)
        a.setflags(write=False)
        object.__setattr__(self, "assignments", a)

    def __eq__(self, other):
        if not isinstance(other, FoldPlan):
            return NotImplemented
        return (self.k, self.seed, self.stratified) == (other.k, other.seed, other.stratified) and np.array_equal(
            self.assignments, other.assignments
        )

    def validation_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)


def stratified_kfold(labels, k: int, seed: int, stratify: bool = True) -> FoldPlan:
    """Seeded fold assignment.

    Rows are shuffled within each class, the classes are laid end to end,
    and positions are dealt round-robin into ``k`` folds. Continuing the
    deal across classes keeps both the overall fold sizes and the per-class
    counts within one of proportional.

    ``labels`` may be a sequence of DataRow or of integer labels.
    """
    y = np.array([r.label if isinstance(r, DataRow) else r for r in labels], dtype=np.int64)
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    if y.size < k:
        raise TooFewSamples(f"{y.size} rows cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    if stratify:
        order = []
        for cls in np.unique(y):
            members = np.flatnonzero(y == cls)
            if members.size < k:
                raise TooFewSamples(f"class {cls} has {members.size} rows, fewer than k={k}")
            order.append(rng.permutation(members))
        order = np.concatenate(order)
    else:
        order = rng.permutation(y.size)
    assignments = np.empty(y.size, dtype=np.int64)
    assignments[order] = np.arange(y.size) % k
    return FoldPlan(k, seed, assignments, stratify)

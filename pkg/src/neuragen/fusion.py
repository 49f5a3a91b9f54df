"""Pool frame features into one 27-value vector per recording, and column scaling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyFeatures, InsufficientData
from .features import FrameFeatures

N_MFCC = 20
DESCRIPTOR_NAMES = ("rms", "f0", "centroid", "bandwidth", "flatness", "rolloff", "zcr")
FEATURE_NAMES = tuple(f"mfcc_mean_{i}" for i in range(N_MFCC)) + tuple(f"{n}_mean" for n in DESCRIPTOR_NAMES)
N_FEATURES = len(FEATURE_NAMES)  # 27

DEGENERATE_STD = 1e-12
SCALER_MODES = ("train", "global")
SCALER_METHODS = ("zscore", "minmax")


@dataclass(frozen=True, eq=False)
class FeatureVector:
    values: np.ndarray
    source_id: str = ""
    unvoiced: bool = False  # f0_mean was filled with 0

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if values.size != N_FEATURES:
            raise ValueError(f"feature vector needs {N_FEATURES} entries, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"{self.source_id or 'feature vector'} contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __eq__(self, other):
        if not isinstance(other, FeatureVector):
            return NotImplemented
        # source_id is provenance, not content; the CSV layout does not carry it
        return np.array_equal(self.values, other.values)


def fuse_features(ff: FrameFeatures) -> FeatureVector:
    """Mean-pool every feature over time and concatenate.

    Layout: 20 MFCC column means, then rms, f0, centroid, bandwidth,
    flatness, rolloff, zcr means. F0 is averaged over voiced frames only and
    set to 0 (with ``unvoiced=True``) when there are none.
    """
    if ff.mfcc.ndim != 2 or ff.mfcc.shape[0] == 0 or ff.rms.size == 0:
        raise EmptyFeatures(f"{ff.source_id or 'clip'}: no frames to pool")
    if ff.mfcc.shape[1] != N_MFCC:
        raise EmptyFeatures(f"expected {N_MFCC} MFCC columns, got {ff.mfcc.shape[1]}")
    unvoiced = ff.f0.size == 0
    f0_mean = 0.0 if unvoiced else float(np.mean(ff.f0))
    tail = [
        np.mean(ff.rms),
        f0_mean,
        np.mean(ff.centroid),
        np.mean(ff.bandwidth),
        np.mean(ff.flatness),
        np.mean(ff.rolloff),
        np.mean(ff.zcr),
    ]
    values = np.concatenate([ff.mfcc.mean(axis=0), tail])
    return FeatureVector(values, ff.source_id, unvoiced)


@dataclass(frozen=True, eq=False)
class Scaler:
    """Per-column affine normalization.

    For ``method="zscore"`` ``center``/``scale`` are the column mean and
    population std; for ``"minmax"`` they are the column minimum and range.
    Columns whose scale is below ``DEGENERATE_STD`` map to 0.
    """

    center: np.ndarray
    scale: np.ndarray
    mode: str = "train"
    method: str = "zscore"
    degenerate: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        center = np.array(self.center, dtype=np.float64)
        scale = np.array(self.scale, dtype=np.float64)
        if center.shape != scale.shape or center.ndim != 1:
            raise ValueError("center and scale must be 1-D arrays of equal length")
        if np.any(scale < 0):
            raise ValueError("scale must be non-negative")
        if self.mode not in SCALER_MODES:
            raise ValueError(f"unknown scaler mode {self.mode!r}")
        if self.method not in SCALER_METHODS:
            raise ValueError(f"unknown scaler method {self.method!r}")
        for arr in (center, scale):
            arr.setflags(write=False)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "degenerate", scale < DEGENERATE_STD)

    @property
    def mean(self) -> np.ndarray:
        return self.center

    @property
    def std(self) -> np.ndarray:
        return self.scale

    def transform(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        safe = np.where(self.degenerate, 1.0, self.scale)
        return np.where(self.degenerate, 0.0, (x - self.center) / safe)

    def inverse_transform(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        return np.where(self.degenerate, self.center, z * self.scale + self.center)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "method": self.method,
            "center": [float(v) for v in self.center],
            "scale": [float(v) for v in self.scale],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scaler":
        return cls(np.asarray(d["center"]), np.asarray(d["scale"]), d.get("mode", "train"), d.get("method", "zscore"))


def fit_scaler(matrix, mode: str = "train", method: str = "zscore") -> Scaler:
    """Fit column statistics on the rows given (callers pass training rows only in "train" mode)."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 2:
        raise InsufficientData(f"need at least 2 rows to fit a scaler, got shape {m.shape}")
    if method == "zscore":
        center = m.mean(axis=0)
        scale = m.std(axis=0)
    elif method == "minmax":
        center = m.min(axis=0)
        scale = m.max(axis=0) - center
    else:
        raise ValueError(f"unknown scaler method {method!r}")
    return Scaler(center, scale, mode, method)


def apply_scaler(s: Scaler, v: FeatureVector) -> FeatureVector:
    return FeatureVector(s.transform(v.values), v.source_id, v.unvoiced)


def unapply_scaler(s: Scaler, v: FeatureVector) -> FeatureVector:
    return FeatureVector(s.inverse_transform(v.values), v.source_id, v.unvoiced)

"""The 27-25-10-5-1 gender classifier, trained with plain numpy backprop."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .dataset_store import DataRow, dataset_hash, feature_matrix, label_vector
from .errors import DivergedLoss, EmptySplit, ModelFormatError
from .fusion import FeatureVector, Scaler, fit_scaler
from .metrics import ConfusionMatrix, compute_metrics

LAYER_SIZES = (27, 25, 10, 5, 1)
DROPOUT_RATE = 0.01
DROPOUT_AFTER = (0, 1)  # hidden layers 1 and 2 (0-based)
PROB_CLAMP = 1e-7
MODEL_FORMAT = "neuragen-model"
MODEL_VERSION = 1
CURVE_METRICS = ("loss", "accuracy", "precision", "recall")


@dataclass
class Network:
    """Dense layers with ReLU hidden units and a single sigmoid output.

    ``weights[l]`` has shape (fan_out, fan_in).
    """

    weights: list
    biases: list
    dropout_rate: float = DROPOUT_RATE
    dropout_after: tuple = DROPOUT_AFTER

    @property
    def layer_sizes(self) -> tuple:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def activations(self) -> tuple:
        return ("relu",) * (len(self.weights) - 1) + ("sigmoid",)

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "Network":
        return Network([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.dropout_rate, self.dropout_after)

    def params(self) -> list:
        """Parameter arrays in a fixed order (W0, b0, W1, b1, ...)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.params())


def init_network(seed: int, layer_sizes: Sequence[int] = LAYER_SIZES, dropout_rate: float = DROPOUT_RATE) -> Network:
    """He-uniform hidden layers, Glorot-uniform output layer, zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    n_layers = len(layer_sizes) - 1
    for i, (fan_in, fan_out) in enumerate(zip(layer_sizes[:-1], layer_sizes[1:])):
        if i < n_layers - 1:
            limit = math.sqrt(6.0 / fan_in)
        else:
            limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Network(weights, biases, dropout_rate)


def sigmoid(z):
    # two-branch form avoids overflow in exp
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass
class ForwardCache:
    activations: list  # a_0 (input) .. a_{L-1} (last hidden, post-dropout)
    pre_activations: list  # z_1 .. z_L
    masks: list  # per hidden layer: scaled dropout mask or None
    output: np.ndarray


def forward(net: Network, x, training: bool = False, rng: Optional[np.random.Generator] = None):
    """Run the network on one 27-vector or a (batch, 27) matrix.

    Returns ``(probability, cache)``; probability is a float for a single
    vector and an array for a batch. Inverted dropout is applied only when
    ``training`` is true.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    a = x[None, :] if single else x
    use_dropout = training and net.dropout_rate > 0
    if use_dropout and rng is None:
        raise ValueError("training-mode forward needs an rng for dropout")
    keep = 1.0 - net.dropout_rate

    acts, zs, masks = [a], [], []
    last = len(net.weights) - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        zs.append(z)
        if l == last:
            a = sigmoid(z)
            break
        a = np.maximum(z, 0.0)
        mask = None
        if use_dropout and l in net.dropout_after:
            mask = (rng.random(a.shape) >= net.dropout_rate) / keep
            a = a * mask
        masks.append(mask)
        acts.append(a)
    p = a[:, 0]
    cache = ForwardCache(acts, zs, masks, p)
    return (float(p[0]) if single else p), cache


def bce_loss(p, y):
    """Binary cross-entropy with p clamped to [1e-7, 1 - 1e-7]; elementwise."""
    p = np.clip(np.asarray(p, dtype=np.float64), PROB_CLAMP, 1.0 - PROB_CLAMP)
    y = np.asarray(y, dtype=np.float64)
    loss = -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    return float(loss) if loss.ndim == 0 else loss


def backward(net: Network, cache: ForwardCache, y) -> list:
    """Gradients of the batch-mean BCE, ordered like ``Network.params()``."""
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    n = y.shape[0]
    delta = (cache.output - y)[:, None] / n  # dL/dz at the sigmoid output
    grads = [None] * (2 * len(net.weights))
    for l in range(len(net.weights) - 1, -1, -1):
        grads[2 * l] = delta.T @ cache.activations[l]
        grads[2 * l + 1] = delta.sum(axis=0)
        if l == 0:
            break
        delta = delta @ net.weights[l]
        mask = cache.masks[l - 1]
        if mask is not None:
            delta = delta * mask
        delta = delta * (cache.pre_activations[l - 1] > 0)
    return grads


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    dropout: bool = True
    dropout_rate: float = DROPOUT_RATE

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


def _empty_curves() -> dict:
    return {split: {m: [] for m in CURVE_METRICS} for split in ("train", "validation")}


@dataclass
class TrainedModel:
    network: Network
    scaler: Scaler
    config: TrainConfig
    manifest: dict = field(default_factory=dict)
    curves: dict = field(default_factory=_empty_curves)

    def predict_proba(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        p, _ = forward(self.network, self.scaler.transform(x), training=False)
        return p

    def to_dict(self) -> dict:
        net = self.network
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "architecture": {
                "layer_sizes": list(net.layer_sizes),
                "activations": list(net.activations),
                "dropout_rate": net.dropout_rate,
                "dropout_after": list(net.dropout_after),
            },
            "weights": [w.ravel().tolist() for w in net.weights],
            "biases": [b.tolist() for b in net.biases],
            "scaler": self.scaler.to_dict(),
            "train_config": self.config.to_dict(),
            "manifest": self.manifest,
            "curves": self.curves,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        if d.get("format") != MODEL_FORMAT:
            raise ModelFormatError(f"not a {MODEL_FORMAT} document")
        if d.get("version") != MODEL_VERSION:
            raise ModelFormatError(f"unsupported model version {d.get('version')!r}")
        try:
            arch = d["architecture"]
            sizes = [int(s) for s in arch["layer_sizes"]]
            weights, biases = d["weights"], d["biases"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelFormatError(f"model document missing field: {exc}") from None
        if len(sizes) < 2 or len(weights) != len(sizes) - 1 or len(biases) != len(sizes) - 1:
            raise ModelFormatError("layer count does not match declared architecture")
        ws, bs = [], []
        for fan_in, fan_out, w, b in zip(sizes[:-1], sizes[1:], weights, biases):
            if len(w) != fan_in * fan_out or len(b) != fan_out:
                raise ModelFormatError(
                    f"layer {fan_in}->{fan_out} expects {fan_in * fan_out}+{fan_out} values, got {len(w)}+{len(b)}"
                )
            ws.append(np.asarray(w, dtype=np.float64).reshape(fan_out, fan_in))
            bs.append(np.asarray(b, dtype=np.float64))
        net = Network(ws, bs, float(arch.get("dropout_rate", DROPOUT_RATE)), tuple(arch.get("dropout_after", DROPOUT_AFTER)))
        if not net.all_finite():
            raise ModelFormatError("model contains non-finite parameters")
        scaler = Scaler.from_dict(d["scaler"])
        if scaler.center.size != sizes[0]:
            raise ModelFormatError("scaler width does not match input layer")
        config = TrainConfig(**d.get("train_config", {}))
        return cls(net, scaler, config, d.get("manifest", {}), d.get("curves") or _empty_curves())

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "TrainedModel":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(doc)


def predict(model: TrainedModel, v) -> tuple[float, int]:
    """Probability of female and the 0/1 class; a tie at 0.5 goes to 1."""
    values = v.values if isinstance(v, FeatureVector) else v
    p = float(model.predict_proba(values)[0])
    return p, int(p >= 0.5)


def _epoch_metrics(net: Network, x: np.ndarray, y: np.ndarray) -> dict:
    p, _ = forward(net, x, training=False)
    loss = float(np.mean(bce_loss(p, y)))
    if not math.isfinite(loss):
        raise DivergedLoss(f"non-finite loss {loss}")
    m = compute_metrics(ConfusionMatrix.from_predictions(y, (p >= 0.5).astype(np.int64)))
    return {"loss": loss, "accuracy": m.accuracy, "precision": m.precision, "recall": m.recall}


def fit_arrays(
    x_train: np.ndarray,
    y_train: np.ndarray,
    cfg: TrainConfig = TrainConfig(),
    x_val: Optional[np.ndarray] = None,
    y_val: Optional[np.ndarray] = None,
    layer_sizes: Sequence[int] = LAYER_SIZES,
):
    """Train on already-scaled arrays; returns (network, curves)."""
    n = x_train.shape[0]
    if n == 0:
        raise EmptySplit("training split is empty")
    seeds = np.random.SeedSequence(cfg.seed).spawn(3)
    init_seed = int(seeds[0].generate_state(1)[0])
    shuffle_rng = np.random.default_rng(seeds[1])
    dropout_rng = np.random.default_rng(seeds[2])

    net = init_network(init_seed, layer_sizes, cfg.dropout_rate if cfg.dropout else 0.0)
    params = net.params()
    opt = Adam(params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)
    batch = min(cfg.batch_size, n)
    has_val = x_val is not None and len(x_val) > 0
    curves = _empty_curves()

    for _epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            p, cache = forward(net, x_train[idx], training=True, rng=dropout_rng)
            opt.step(params, backward(net, cache, y_train[idx]))
        if not net.all_finite():
            raise DivergedLoss("parameters became non-finite")
        for split, xs, ys in (("train", x_train, y_train), ("validation", x_val, y_val)):
            if split == "validation" and not has_val:
                continue
            for k, v in _epoch_metrics(net, xs, ys).items():
                curves[split][k].append(v)
    return net, curves


def train(
    rows: Sequence[DataRow],
    cfg: TrainConfig = TrainConfig(),
    train_idx=None,
    val_idx=None,
    scaler_mode: str = "train",
    scaler_method: str = "zscore",
) -> TrainedModel:
    """Fit a scaler and train on ``rows[train_idx]``, tracking ``rows[val_idx]`` per epoch.

    With ``scaler_mode="train"`` statistics come from the training rows only;
    ``"global"`` uses every row passed in.
    """
    x_all = feature_matrix(rows)
    y_all = label_vector(rows)
    train_idx = np.arange(len(rows)) if train_idx is None else np.asarray(train_idx, dtype=np.int64)
    val_idx = np.empty(0, dtype=np.int64) if val_idx is None else np.asarray(val_idx, dtype=np.int64)
    if train_idx.size == 0:
        raise EmptySplit("training split is empty")

    fit_rows = x_all[train_idx] if scaler_mode == "train" else x_all
    scaler = fit_scaler(fit_rows, mode=scaler_mode, method=scaler_method)
    x_train = scaler.transform(x_all[train_idx])
    x_val = scaler.transform(x_all[val_idx]) if val_idx.size else None
    net, curves = fit_arrays(x_train, y_all[train_idx], cfg, x_val, y_all[val_idx] if val_idx.size else None)

    manifest = {
        "data_hash": dataset_hash(rows),
        "n_train": int(train_idx.size),
        "n_validation": int(val_idx.size),
        "scaler_mode": scaler_mode,
        "scaler_method": scaler_method,
        "seed": cfg.seed,
    }
    return TrainedModel(net, scaler, cfg, manifest, curves)

"""Four-layer fully-connected superpixel classifier.

Input per superpixel is one mask-prior value followed by the pooled feature
vector; three ReLU hidden layers (512-512-512 by default) feed a single
sigmoid output giving the object probability. Training is mini-batch SGD on
mean binary crossentropy, written against logits for numeric stability.

Weight file format MLPW (little-endian): magic "MLPW", u32 layer count,
then per layer u32 out, u32 in, float32 weights row-major, float32 biases.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .errors import RasterIOError, ValidationError

MLPW_MAGIC = b"MLPW"

DEFAULT_HIDDEN = (512, 512, 512)


@dataclass
class MlpWeights:
    """Ordered (weight matrix out x in, bias vector out) pairs."""

    layers: list  # of (np.ndarray, np.ndarray)

    def __post_init__(self):
        if not self.layers:
            raise ValidationError("network needs at least one layer")
        prev_out = None
        for w, b in self.layers:
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ValidationError("layer shapes inconsistent")
            if prev_out is not None and w.shape[1] != prev_out:
                raise ValidationError("layer dimension chain broken")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValidationError("weights must be finite")
            prev_out = w.shape[0]
        if self.layers[-1][0].shape[0] != 1:
            raise ValidationError("final layer must have a single output")

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[1]


@dataclass(frozen=True)
class SpxSample:
    """One training sample: [mask prior | pooled features] and its label."""

    input: np.ndarray
    label: bool

    def __post_init__(self):
        if not (0.0 <= self.input[0] <= 1.0):
            raise ValidationError("mask prior component must be in [0, 1]")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 100
    batch_size: int = 64
    seed: int = 0
    hidden: tuple = DEFAULT_HIDDEN


def init_weights(input_dim: int, hidden=DEFAULT_HIDDEN, seed: int = 0) -> MlpWeights:
    """Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases, seeded."""
    rng = np.random.default_rng(seed)
    dims = [input_dim, *hidden, 1]
    layers = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-lim, lim, size=(fan_out, fan_in))
        layers.append((w, np.zeros(fan_out)))
    return MlpWeights(layers)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _forward_logits(weights: MlpWeights, x):
    """Hidden activations and the final pre-sigmoid logits."""
    acts = [x]
    a = x
    n_layers = len(weights.layers)
    for li, (w, b) in enumerate(weights.layers):
        z = a @ w.T.astype(np.float64) + b.astype(np.float64)
        if li < n_layers - 1:
            a = np.maximum(z, 0.0)
            acts.append(a)
        else:
            return acts, z[:, 0]
    raise AssertionError("unreachable")


def forward(weights: MlpWeights, batch) -> np.ndarray:
    """Object probability in (0, 1) per input row."""
    x = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if x.shape[1] != weights.input_dim:
        raise ValidationError(
            f"input dim {x.shape[1]} does not match network input {weights.input_dim}"
        )
    _, logits = _forward_logits(weights, x)
    return _sigmoid(logits)


def classify(weights: MlpWeights, batch, threshold: float = 0.5) -> np.ndarray:
    """Object iff probability strictly exceeds the threshold."""
    if not (0.0 < threshold < 1.0):
        raise ValidationError("threshold must be in (0, 1)")
    return forward(weights, batch) > threshold


def bce_loss_and_grads(weights: MlpWeights, x, y):
    """Mean binary crossentropy and its gradients w.r.t. every parameter.

    Loss is computed from logits: max(z,0) - z*y + log(1 + exp(-|z|)).
    Returns (loss, [(dW, db) per layer]).
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    n = len(y)
    acts, z = _forward_logits(weights, x)
    loss = float(np.mean(np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))))

    delta = ((_sigmoid(z) - y) / n)[:, None]  # d loss / d logits
    grads = []
    for li in range(len(weights.layers) - 1, -1, -1):
        w, _ = weights.layers[li]
        a_prev = acts[li]
        grads.append((delta.T @ a_prev, delta.sum(axis=0)))
        if li > 0:
            delta = delta @ w.astype(np.float64)
            delta[acts[li] <= 0.0] = 0.0  # ReLU gate
    grads.reverse()
    return loss, grads


def train(samples, config: TrainConfig = TrainConfig()):
    """Mini-batch SGD on mean BCE; returns (weights, per-epoch loss curve).

    Requires at least one sample of each class. Deterministic for a fixed
    seed; the returned weights are float32 so that saving and reloading
    reproduces the forward pass exactly.
    """
    x = np.stack([np.asarray(s.input, dtype=np.float64) for s in samples])
    y = np.array([float(s.label) for s in samples])
    if y.min() == y.max():
        raise ValidationError("degenerate training set: only one class present")

    rng = np.random.default_rng(config.seed)
    weights = init_weights(x.shape[1], config.hidden, seed=config.seed)
    losses = []
    n = len(y)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            sel = order[start : start + config.batch_size]
            loss, grads = bce_loss_and_grads(weights, x[sel], y[sel])
            epoch_loss += loss * len(sel)
            weights = MlpWeights(
                [
                    (w - config.learning_rate * dw, b - config.learning_rate * db)
                    for (w, b), (dw, db) in zip(weights.layers, grads)
                ]
            )
        losses.append(epoch_loss / n)

    final = MlpWeights(
        [(w.astype(np.float32), b.astype(np.float32)) for w, b in weights.layers]
    )
    return final, losses


# ---------------------------------------------------------------------------
# MLPW weight files
# ---------------------------------------------------------------------------


def save_weights(weights: MlpWeights, path) -> None:
    with open(path, "wb") as fh:
        fh.write(MLPW_MAGIC)
        fh.write(struct.pack("<I", len(weights.layers)))
        for w, b in weights.layers:
            out_dim, in_dim = w.shape
            fh.write(struct.pack("<II", out_dim, in_dim))
            fh.write(np.ascontiguousarray(w, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f4").tobytes())


def load_weights(path) -> MlpWeights:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MLPW_MAGIC:
            raise RasterIOError(f"bad magic {magic!r} in {path}", code="bad-magic")
        (n_layers,) = struct.unpack("<I", fh.read(4))
        layers = []
        for _ in range(n_layers):
            head = fh.read(8)
            if len(head) != 8:
                raise RasterIOError(f"truncated weights: {path}", code="payload-size-mismatch")
            out_dim, in_dim = struct.unpack("<II", head)
            wbytes = fh.read(out_dim * in_dim * 4)
            bbytes = fh.read(out_dim * 4)
            if len(wbytes) != out_dim * in_dim * 4 or len(bbytes) != out_dim * 4:
                raise RasterIOError(f"truncated weights: {path}", code="payload-size-mismatch")
            w = np.frombuffer(wbytes, dtype="<f4").reshape(out_dim, in_dim)
            b = np.frombuffer(bbytes, dtype="<f4")
            layers.append((w.copy(), b.copy()))
    try:
        return MlpWeights(layers)
    except ValidationError as exc:
        raise RasterIOError(f"invalid weight file: {path} ({exc})", code="bad-dim-chain") from exc


# ---------------------------------------------------------------------------
# Estimator wrapper
# ---------------------------------------------------------------------------


class SuperpixelClassifier(BaseEstimator, ClassifierMixin):
    """sklearn-style front end: fit(X, y), predict_proba, predict."""

    def __init__(self, hidden=DEFAULT_HIDDEN, learning_rate=0.05, epochs=100,
                 batch_size=64, threshold=0.5, seed=0):
        self.hidden = hidden
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.threshold = threshold
        self.seed = seed

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y).astype(bool)
        samples = [SpxSample(xi, bool(yi)) for xi, yi in zip(X, y)]
        cfg = TrainConfig(
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            seed=self.seed,
            hidden=tuple(self.hidden),
        )
        self.weights_, self.loss_curve_ = train(samples, cfg)
        self.classes_ = np.array([False, True])
        return self

    def predict_proba(self, X):
        p = forward(self.weights_, X)
        return np.stack([1.0 - p, p], axis=1)

    def predict(self, X):
        return classify(self.weights_, X, self.threshold)

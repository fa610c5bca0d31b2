"""Compact MLP experts: forward pass, loss, backprop and training loop.

Each expert maps a channel magnitude vector to a confidence in (0, 1)
through two ReLU layers and a sigmoid head, and is trained with binary
cross-entropy under plain mini-batch gradient descent.  Everything is
deterministic given the training seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .data import AttributeDataset
from .errors import (
    FormatError,
    ParameterError,
    SchemaError,
    ShapeError,
    TrainingDivergedError,
)

DEFAULT_HIDDEN_SIZES = (48, 24)
DEFAULT_LEARNING_RATE = 0.02
DEFAULT_BATCH_SIZE = 64
DEFAULT_EPOCHS = 4000
PROB_EPS = 1.0e-12
DECISION_THRESHOLD = 0.5
SMOOTHING_WINDOW = 50


@dataclass(frozen=True)
class MlpWeights:
    """Parameters of one expert; also reused as the gradient structure."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W3: np.ndarray
    b3: np.ndarray

    def __post_init__(self):
        arrays = {name: np.asarray(getattr(self, name), dtype=float)
                  for name in ("W1", "b1", "W2", "b2", "W3", "b3")}
        for name, arr in arrays.items():
            if not np.all(np.isfinite(arr)):
                raise ParameterError(f"{name} contains non-finite entries")
            object.__setattr__(self, name, arr)
        h1, n = arrays["W1"].shape
        h2 = arrays["W2"].shape[0]
        if arrays["b1"].shape != (h1,):
            raise ShapeError(f"b1 must have shape ({h1},)")
        if arrays["W2"].shape != (h2, h1):
            raise ShapeError(f"W2 must have shape ({h2}, {h1})")
        if arrays["b2"].shape != (h2,):
            raise ShapeError(f"b2 must have shape ({h2},)")
        if arrays["W3"].shape != (1, h2):
            raise ShapeError(f"W3 must have shape (1, {h2})")
        if arrays["b3"].shape != (1,):
            raise ShapeError("b3 must be a scalar (shape (1,))")

    @property
    def n(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden_sizes(self) -> Tuple[int, int]:
        return self.W1.shape[0], self.W2.shape[0]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = DEFAULT_EPOCHS
    learning_rate: float = DEFAULT_LEARNING_RATE
    batch_size: int = DEFAULT_BATCH_SIZE
    hidden_sizes: Tuple[int, int] = DEFAULT_HIDDEN_SIZES
    seed: int = 0
    early_stop_patience: Optional[int] = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ParameterError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0:
            raise ParameterError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")


@dataclass
class TrainHistory:
    """Per-epoch training loss and held-out accuracy."""

    train_loss: List[float] = field(default_factory=list)
    test_accuracy: List[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.train_loss)

    def smoothed(self, window: int = SMOOTHING_WINDOW) -> "TrainHistory":
        return TrainHistory(
            train_loss=moving_average(self.train_loss, window),
            test_accuracy=moving_average(self.test_accuracy, window),
        )

    def best_accuracy(self) -> float:
        return max(self.test_accuracy) if self.test_accuracy else 0.0


def moving_average(values: Sequence[float], window: int) -> List[float]:
    """Trailing moving average, partial windows during warm-up."""
    if window < 1:
        raise ParameterError("window must be >= 1")
    out: List[float] = []
    acc = 0.0
    for i, v in enumerate(values):
        acc += v
        if i >= window:
            acc -= values[i - window]
        out.append(acc / min(i + 1, window))
    return out


def init_weights(n: int, hidden_sizes: Tuple[int, int], rng) -> MlpWeights:
    """Symmetric uniform init, bound sqrt(6 / (fan_in + fan_out)); zero biases."""
    h1, h2 = hidden_sizes

    def uniform(fan_in: int, fan_out: int) -> np.ndarray:
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=(fan_out, fan_in))

    return MlpWeights(
        W1=uniform(n, h1),
        b1=np.zeros(h1),
        W2=uniform(h1, h2),
        b2=np.zeros(h2),
        W3=uniform(h2, 1),
        b3=np.zeros(1),
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def forward_batch(weights: MlpWeights, X: np.ndarray) -> np.ndarray:
    """Confidences for a batch of feature rows, clamped inside (0, 1)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != weights.n:
        raise ShapeError(
            f"expected feature rows of length {weights.n}, got shape {X.shape}"
        )
    a1 = np.maximum(X @ weights.W1.T + weights.b1, 0.0)
    a2 = np.maximum(a1 @ weights.W2.T + weights.b2, 0.0)
    z3 = a2 @ weights.W3.T + weights.b3
    return np.clip(_sigmoid(z3[:, 0]), PROB_EPS, 1.0 - PROB_EPS)


def forward(weights: MlpWeights, h: Sequence[float]) -> float:
    """Confidence p(attribute | h) for a single feature vector."""
    h = np.asarray(h, dtype=float)
    if h.ndim != 1 or h.size != weights.n:
        raise ShapeError(
            f"expected a feature vector of length {weights.n}, got shape {h.shape}"
        )
    return float(forward_batch(weights, h[None, :])[0])


def bce_loss(preds: Sequence[float], labels: Sequence[int]) -> float:
    """Mean binary cross-entropy with probabilities clamped away from 0/1."""
    p = np.asarray(preds, dtype=float)
    y = np.asarray(labels, dtype=float)
    if p.size == 0:
        raise ParameterError("bce_loss needs at least one prediction")
    if p.shape != y.shape:
        raise ShapeError(f"preds shape {p.shape} != labels shape {y.shape}")
    p = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def gradient(weights: MlpWeights, X: np.ndarray, y: np.ndarray) -> MlpWeights:
    """Analytic gradient of the mean BCE over the batch.

    Returns a structure congruent to the weights (one array per parameter).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim != 2 or X.shape[1] != weights.n:
        raise ShapeError(
            f"expected feature rows of length {weights.n}, got shape {X.shape}"
        )
    if X.shape[0] == 0:
        raise ParameterError("gradient needs a non-empty batch")
    if y.shape[0] != X.shape[0]:
        raise ShapeError("batch features and labels disagree in length")

    z1 = X @ weights.W1.T + weights.b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ weights.W2.T + weights.b2
    a2 = np.maximum(z2, 0.0)
    z3 = a2 @ weights.W3.T + weights.b3
    p = np.clip(_sigmoid(z3[:, 0]), PROB_EPS, 1.0 - PROB_EPS)

    batch = X.shape[0]
    d3 = ((p - y) / batch)[:, None]
    gW3 = d3.T @ a2
    gb3 = d3.sum(axis=0)
    d2 = (d3 @ weights.W3) * (z2 > 0)
    gW2 = d2.T @ a1
    gb2 = d2.sum(axis=0)
    d1 = (d2 @ weights.W2) * (z1 > 0)
    gW1 = d1.T @ X
    gb1 = d1.sum(axis=0)
    return MlpWeights(W1=gW1, b1=gb1, W2=gW2, b2=gb2, W3=gW3, b3=gb3)


def train_arrays(
    config: TrainConfig,
    train_X: np.ndarray,
    train_y: np.ndarray,
    test_X: np.ndarray,
    test_y: np.ndarray,
) -> Tuple[MlpWeights, TrainHistory]:
    """Mini-batch gradient descent on raw arrays; see ``train``."""
    train_X = np.asarray(train_X, dtype=float)
    train_y = np.asarray(train_y, dtype=float).reshape(-1)
    test_X = np.asarray(test_X, dtype=float)
    test_y = np.asarray(test_y, dtype=float).reshape(-1)
    if train_X.size == 0 or test_X.size == 0:
        raise ParameterError("train and test sets must be non-empty")
    if train_X.shape[1] != test_X.shape[1]:
        raise ShapeError("train and test feature dimensions disagree")

    rng = np.random.default_rng(config.seed)
    weights = init_weights(train_X.shape[1], config.hidden_sizes, rng)
    history = TrainHistory()
    lr = config.learning_rate
    total = train_X.shape[0]
    best_acc = -1.0
    stale = 0

    for epoch in range(config.epochs):
        order = rng.permutation(total)
        for start in range(0, total, config.batch_size):
            batch = order[start : start + config.batch_size]
            grads = gradient(weights, train_X[batch], train_y[batch])
            weights = MlpWeights(
                W1=weights.W1 - lr * grads.W1,
                b1=weights.b1 - lr * grads.b1,
                W2=weights.W2 - lr * grads.W2,
                b2=weights.b2 - lr * grads.b2,
                W3=weights.W3 - lr * grads.W3,
                b3=weights.b3 - lr * grads.b3,
            )
        loss = bce_loss(forward_batch(weights, train_X), train_y)
        if not np.isfinite(loss):
            raise TrainingDivergedError(
                f"loss became non-finite at epoch {epoch + 1}",
                last_epoch=len(history),
            )
        acc = float(np.mean((forward_batch(weights, test_X) >= DECISION_THRESHOLD) == test_y))
        history.train_loss.append(loss)
        history.test_accuracy.append(acc)
        if config.early_stop_patience is not None:
            if acc > best_acc:
                best_acc = acc
                stale = 0
            else:
                stale += 1
                if stale > config.early_stop_patience:
                    break
    return weights, history


def train(
    config: TrainConfig,
    train_set: AttributeDataset,
    test_set: AttributeDataset,
) -> Tuple[MlpWeights, TrainHistory]:
    """Train one expert; history records every epoch, seeded end to end."""
    return train_arrays(
        config,
        train_set.features_matrix(),
        train_set.labels_vector(),
        test_set.features_matrix(),
        test_set.labels_vector(),
    )


def evaluate(
    weights: MlpWeights,
    dataset: AttributeDataset,
    threshold: float = DECISION_THRESHOLD,
) -> Tuple[float, np.ndarray]:
    """Thresholded accuracy plus the per-example binary predictions."""
    if len(dataset) == 0:
        raise ParameterError("cannot evaluate an empty dataset")
    probs = forward_batch(weights, dataset.features_matrix())
    preds = (probs >= threshold).astype(int)
    accuracy = float(np.mean(preds == dataset.labels_vector()))
    return accuracy, preds


def save_weights(weights: MlpWeights, path) -> None:
    """Single JSON document, self-describing dimensions, row-major arrays."""
    h1, h2 = weights.hidden_sizes
    doc = {
        "n": weights.n,
        "h1": h1,
        "h2": h2,
        "W1": weights.W1.tolist(),
        "b1": weights.b1.tolist(),
        "W2": weights.W2.tolist(),
        "b2": weights.b2.tolist(),
        "W3": weights.W3.tolist(),
        "b3": float(weights.b3[0]),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_weights(path) -> MlpWeights:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"unreadable weight file: {exc.msg}") from exc
    for key in ("n", "h1", "h2", "W1", "b1", "W2", "b2", "W3", "b3"):
        if key not in doc:
            raise FormatError(f"weight file missing field {key!r}")
    n, h1, h2 = int(doc["n"]), int(doc["h1"]), int(doc["h2"])
    arrays = {
        "W1": (np.asarray(doc["W1"], dtype=float), (h1, n)),
        "b1": (np.asarray(doc["b1"], dtype=float), (h1,)),
        "W2": (np.asarray(doc["W2"], dtype=float), (h2, h1)),
        "b2": (np.asarray(doc["b2"], dtype=float), (h2,)),
        "W3": (np.asarray(doc["W3"], dtype=float), (1, h2)),
        "b3": (np.asarray([doc["b3"]], dtype=float).reshape(-1), (1,)),
    }
    for name, (arr, shape) in arrays.items():
        if arr.shape != shape:
            raise SchemaError(
                f"{name} has shape {arr.shape}, declared dimensions imply {shape}"
            )
    return MlpWeights(**{name: arr for name, (arr, _) in arrays.items()})

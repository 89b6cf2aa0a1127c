"""Feedforward flow classifier with activation capture and exact input gradients.

The net is a plain ReLU stack with a softmax head. Per-sample inference goes
through the selected kernel backend; training and all batch paths are
vectorized numpy so persisted artifacts do not depend on the backend.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DataFormatError

LOSS_FLOOR = 1e-12
MODEL_MAGIC = "robustids-mlp v1"


@dataclass(frozen=True)
class MlpSpec:
    input_width: int = 128
    hidden_widths: tuple = (128, 96, 64, 48, 32)
    output_width: int = 2
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if len(self.hidden_widths) < 1:
            raise ValueError("at least one hidden layer required")
        widths = (self.input_width, *self.hidden_widths, self.output_width)
        if any(w < 1 for w in widths):
            raise ValueError(f"layer widths must be >= 1, got {widths}")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation {self.activation!r}")

    @property
    def layer_widths(self):
        return (self.input_width, *self.hidden_widths, self.output_width)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 30
    batch_size: int = 128
    optimizer: str = "adam"  # adaptive-moment SGD; "sgd" for the plain variant
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError("learning rate, batch size must be positive; epochs >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


class MlpModel:
    """Layered weights/biases; immutable during inference, mutated by train()."""

    def __init__(self, spec, weights, biases):
        self.spec = spec
        self.weights = [np.ascontiguousarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.ascontiguousarray(b, dtype=np.float64) for b in biases]
        widths = spec.layer_widths
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (widths[i], widths[i + 1]) or b.shape != (widths[i + 1],):
                raise ValueError(f"layer {i} shape mismatch for spec {widths}")

    @property
    def n_hidden(self):
        return len(self.spec.hidden_widths)

    def forward(self, x):
        """Single sample -> (probs, trace of hidden activations)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.spec.input_width,):
            raise ValueError(f"expected input of width {self.spec.input_width}")
        if not np.isfinite(x).all():
            raise ValueError("non-finite input")
        return _kernels.forward_trace(self.weights, self.biases, x)

    def forward_batch(self, X):
        """(n, input_width) -> (probs (n, c), traces: per-layer (n, w_l) matrices)."""
        h = np.asarray(X, dtype=np.float64)
        traces = []
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
            traces.append(h)
        z = h @ self.weights[-1] + self.biases[-1]
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        probs = e / e.sum(axis=1, keepdims=True)
        return probs, traces

    def predict(self, x):
        probs, _ = self.forward(x)
        return int(np.argmax(probs))

    def predict_batch(self, X):
        probs, _ = self.forward_batch(X)
        return np.argmax(probs, axis=1)

    def input_gradient(self, x, y):
        """Exact d loss / d x for cross-entropy at label y."""
        _, grad = _kernels.input_gradient(self.weights, self.biases, np.asarray(x, dtype=np.float64), int(y))
        return grad

    def logit_gradient(self, x, class_index):
        """(logit value, d logit / d x) for one pre-softmax output."""
        seed = np.zeros(self.spec.output_width)
        seed[class_index] = 1.0
        return _kernels.logit_value_grad(self.weights, self.biases, np.asarray(x, dtype=np.float64), seed)

    def input_gradient_batch(self, X, y):
        """Rows of d loss/d x for labels y (vectorized backprop)."""
        X = np.asarray(X, dtype=np.float64)
        probs, acts = self._forward_acts(X)
        delta = probs.copy()
        delta[np.arange(len(X)), np.asarray(y, dtype=int)] -= 1.0
        return self._backprop_batch(acts, delta)

    def logit_seed_gradient_batch(self, X, seeds):
        """(values, grads) of seeds . logits per row; seeds is (n, output_width)."""
        X = np.asarray(X, dtype=np.float64)
        logits, acts = self._forward_acts(X, softmax=False)
        values = np.einsum("ij,ij->i", logits, seeds)
        return values, self._backprop_batch(acts, np.asarray(seeds, dtype=np.float64))

    def _forward_acts(self, X, softmax=True):
        acts = [X]
        h = X
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
            acts.append(h)
        z = h @ self.weights[-1] + self.biases[-1]
        if not softmax:
            return z, acts
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True), acts

    def _backprop_batch(self, acts, delta):
        for i in range(len(self.weights) - 1, 0, -1):
            delta = (delta @ self.weights[i].T) * (acts[i] > 0.0)
        return delta @ self.weights[0].T

    def save(self, path):
        save(self, path)


def init_model(spec, seed):
    """Glorot-uniform initialization, bit-deterministic under seed."""
    rng = np.random.default_rng(seed)
    widths = spec.layer_widths
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(spec, weights, biases)


def loss(probs, y):
    """Cross-entropy -log p[y], floored so degenerate probabilities stay finite."""
    return float(-np.log(max(float(np.asarray(probs)[int(y)]), LOSS_FLOOR)))


def _batch_loss_grad(model, X, y):
    probs, acts = model._forward_acts(X)
    n = len(X)
    accuracy = float((np.argmax(probs, axis=1) == y).mean())
    picked = np.maximum(probs[np.arange(n), y], LOSS_FLOOR)
    total = -np.log(picked).sum()
    delta = probs  # reused in place as the output-layer gradient
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads_w, grads_b = [], []
    d = delta
    for i in range(len(model.weights) - 1, -1, -1):
        grads_w.append(acts[i].T @ d)
        grads_b.append(d.sum(axis=0))
        if i > 0:
            d = (d @ model.weights[i].T) * (acts[i] > 0.0)
    grads_w.reverse()
    grads_b.reverse()
    return total / n, grads_w, grads_b, accuracy


def train(model, data, config):
    """Minibatch-train in place; returns (model, per-epoch history).

    `data` is a (features, labels) pair or any object with feature_matrix() /
    label_vector() (e.g. ingest.Dataset). Deterministic for a fixed seed when
    run single-threaded.
    """
    X, y = _as_matrices(data)
    if len(X) == 0:
        raise ValueError("empty training data")
    if X.shape[1] != model.spec.input_width:
        raise ValueError(f"data width {X.shape[1]} != model input width {model.spec.input_width}")
    y = np.asarray(y, dtype=int)
    rng = np.random.default_rng(config.seed)
    adam_m = [np.zeros_like(w) for w in model.weights] + [np.zeros_like(b) for b in model.biases]
    adam_v = [np.zeros_like(g) for g in adam_m]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(X))
        epoch_loss = 0.0
        epoch_correct = 0.0
        for start in range(0, len(X), config.batch_size):
            idx = order[start : start + config.batch_size]
            mean_loss, grads_w, grads_b, acc = _batch_loss_grad(model, X[idx], y[idx])
            epoch_loss += mean_loss * len(idx)
            epoch_correct += acc * len(idx)
            params = model.weights + model.biases
            grads = grads_w + grads_b
            step += 1
            for j, (p, g) in enumerate(zip(params, grads)):
                if config.optimizer == "adam":
                    adam_m[j] = beta1 * adam_m[j] + (1 - beta1) * g
                    adam_v[j] = beta2 * adam_v[j] + (1 - beta2) * g * g
                    m_hat = adam_m[j] / (1 - beta1**step)
                    v_hat = adam_v[j] / (1 - beta2**step)
                    p -= config.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
                else:
                    p -= config.learning_rate * g
        history.append(
            {
                "epoch": epoch,
                "loss": epoch_loss / len(X),
                "accuracy": epoch_correct / len(X),
            }
        )
    return model, history


def _as_matrices(data):
    if isinstance(data, tuple):
        X, y = data
        return np.asarray(X, dtype=np.float64), np.asarray(y)
    return data.feature_matrix(), data.label_vector()


def save(model, path):
    """Versioned text format; 17 significant digits so floats round-trip exactly."""
    with open(path, "w") as fh:
        fh.write(MODEL_MAGIC + "\n")
        fh.write(
            json.dumps(
                {
                    "input_width": model.spec.input_width,
                    "hidden_widths": list(model.spec.hidden_widths),
                    "output_width": model.spec.output_width,
                    "activation": model.spec.activation,
                }
            )
            + "\n"
        )
        for i, (w, b) in enumerate(zip(model.weights, model.biases)):
            fh.write(f"W {i} {w.shape[0]} {w.shape[1]}\n")
            for row in w:
                fh.write(" ".join(format(v, ".17g") for v in row) + "\n")
            fh.write(f"b {i} {b.shape[0]}\n")
            fh.write(" ".join(format(v, ".17g") for v in b) + "\n")
        fh.write("END\n")


def load(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != MODEL_MAGIC:
        raise DataFormatError(f"{path}: not a {MODEL_MAGIC} file")
    try:
        meta = json.loads(lines[1])
        spec = MlpSpec(
            input_width=meta["input_width"],
            hidden_widths=tuple(meta["hidden_widths"]),
            output_width=meta["output_width"],
            activation=meta["activation"],
        )
        weights, biases = [], []
        pos = 2
        for i in range(len(spec.hidden_widths) + 1):
            tag, li, rows, cols = lines[pos].split()
            if tag != "W" or int(li) != i:
                raise ValueError(f"expected layer {i} weights at line {pos + 1}")
            rows, cols = int(rows), int(cols)
            w = np.array([[float(v) for v in lines[pos + 1 + r].split()] for r in range(rows)])
            if w.shape != (rows, cols):
                raise ValueError(f"layer {i}: ragged weight rows")
            pos += 1 + rows
            tag, li, n = lines[pos].split()
            if tag != "b" or int(li) != i:
                raise ValueError(f"expected layer {i} bias at line {pos + 1}")
            b = np.array([float(v) for v in lines[pos + 1].split()])
            if b.shape != (int(n),):
                raise ValueError(f"layer {i}: bias length mismatch")
            pos += 2
            weights.append(w)
            biases.append(b)
        if lines[pos] != "END":
            raise ValueError("missing END marker")
    except (IndexError, KeyError, ValueError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{path}: corrupt model file ({exc})") from exc
    return MlpModel(spec, weights, biases)

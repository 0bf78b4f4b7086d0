"""Dense feedforward binary classifier with analytic gradients.

The network is relu-activated with a single sigmoid output. Gradients are
available with respect to the parameters (for training) and with respect to
the inputs (for gradient-based evasion attacks). All arithmetic is float64
numpy, so identical seeds give bitwise-identical results.

For attacks that need two class scores from the single output, the two-class
logit pair is defined as (-z/2, +z/2) where z is the pre-sigmoid output, so
the class-1 margin equals z and sigmoid(z) stays the class-1 probability.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import BadShape, Diverged, IoFailure, ShapeMismatch

PROB_CLAMP = 1e-12

_CKPT_MAGIC = b"IDSMLP01"
_CKPT_VERSION = 1
_ACT_CODES = {"relu": 0, "sigmoid": 1}
_ACT_NAMES = {v: k for k, v in _ACT_CODES.items()}


@dataclass
class MlpModel:
    layer_dims: list[int]
    weights: list[np.ndarray]  # weights[i] has shape (layer_dims[i], layer_dims[i+1])
    biases: list[np.ndarray]
    hidden_activation: str = "relu"
    output_activation: str = "sigmoid"

    @property
    def n_features(self) -> int:
        return self.layer_dims[0]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "MlpModel":
        return MlpModel(
            layer_dims=list(self.layer_dims),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            hidden_activation=self.hidden_activation,
            output_activation=self.output_activation,
        )


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    epochs: int = 50
    validation_split: float = 0.25
    batch_size: int = 256
    optimizer: str = "adam"
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 < self.validation_split < 1.0:
            raise ValueError("validation_split must lie in (0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "train_loss": self.train_loss,
            "train_accuracy": self.train_accuracy,
            "val_loss": self.val_loss,
            "val_accuracy": self.val_accuracy,
        }


def init(layer_dims, seed: int) -> MlpModel:
    """Glorot-uniform weights, zero biases, deterministic under seed."""
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2:
        raise BadShape("layer_dims needs at least input and output entries")
    if dims[-1] != 1:
        raise BadShape(f"output layer must have width 1, got {dims[-1]}")
    if any(d < 1 for d in dims):
        raise BadShape(f"layer widths must be positive, got {dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (d_in + d_out))
        weights.append(rng.uniform(-limit, limit, size=(d_in, d_out)))
        biases.append(np.zeros(d_out))
    return MlpModel(layer_dims=dims, weights=weights, biases=biases)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _check_input(model: MlpModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ShapeMismatch(
            f"expected input of shape (n, {model.n_features}), got {X.shape}"
        )
    return X

def _forward_cache(model: MlpModel, X: np.ndarray):
    """Pre-activations and activations per layer; the last z is pre-sigmoid."""
    pre, act = [], [X]
    a = X
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        pre.append(z)
        if i < model.n_layers - 1:
            a = np.maximum(z, 0.0)
            act.append(a)
    return pre, act


def logits(model: MlpModel, X) -> np.ndarray:
    """Pre-sigmoid output z, one value per row; forward() equals sigmoid(z)."""
    X = _check_input(model, X)
    pre, _ = _forward_cache(model, X)
    return pre[-1][:, 0]


def forward(model: MlpModel, X) -> np.ndarray:
    """Class-1 probability per row, clamped into (0, 1)."""
    p = _sigmoid(logits(model, X))
    return np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)


def predict(model: MlpModel, X, threshold: float = 0.5) -> np.ndarray:
    """Label 1 where the probability is >= threshold (boundary inclusive)."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    return (forward(model, X) >= threshold).astype(np.int64)


def loss_bce(p, y) -> float:
    """Mean binary cross-entropy; probabilities clamped to stay finite."""
    p = np.asarray(p, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if p.shape[0] != y.shape[0]:
        raise ShapeMismatch(f"p has {p.shape[0]} entries, y has {y.shape[0]}")
    pc = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(np.mean(-(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))))


def _backprop(model: MlpModel, X: np.ndarray, y: np.ndarray):
    """Gradients of mean BCE w.r.t. all parameters and the input matrix."""
    n = X.shape[0]
    pre, act = _forward_cache(model, X)
    p = _sigmoid(pre[-1][:, 0])
    # sigmoid + BCE collapse to (p - y) at the output pre-activation
    delta = ((p - y) / n)[:, None]
    grads_w = [None] * model.n_layers
    grads_b = [None] * model.n_layers
    for i in range(model.n_layers - 1, -1, -1):
        grads_w[i] = act[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        upstream = delta @ model.weights[i].T
        if i > 0:
            upstream = upstream * (pre[i - 1] > 0)
        delta = upstream
    return grads_w, grads_b, delta, p


def grad_params(model: MlpModel, X, y):
    """Exact gradients of loss_bce(forward(X), y) for every weight and bias."""
    X = _check_input(model, X)
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape[0] != X.shape[0]:
        raise ShapeMismatch(f"X has {X.shape[0]} rows, y has {y.shape[0]}")
    gw, gb, _, _ = _backprop(model, X, y)
    return gw, gb


def grad_input(model: MlpModel, X, y) -> np.ndarray:
    """Exact gradient of loss_bce(forward(X), y) w.r.t. each input cell."""
    X = _check_input(model, X)
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape[0] != X.shape[0]:
        raise ShapeMismatch(f"X has {X.shape[0]} rows, y has {y.shape[0]}")
    _, _, gx, _ = _backprop(model, X, y)
    return gx


def logit_input_grad(model: MlpModel, X) -> np.ndarray:
    """Per-row gradient of the pre-sigmoid output z w.r.t. the input."""
    X = _check_input(model, X)
    pre, _ = _forward_cache(model, X)
    delta = np.ones((X.shape[0], 1))
    for i in range(model.n_layers - 1, -1, -1):
        upstream = delta @ model.weights[i].T
        if i > 0:
            upstream = upstream * (pre[i - 1] > 0)
        delta = upstream
    return delta


def jacobian(model: MlpModel, X) -> np.ndarray:
    """Forward derivative of both class scores: shape (n, 2, d).

    Class scores are F0 = 1 - p and F1 = p, so the two rows are exact
    negations: dF1/dx = p(1-p) * dz/dx and dF0/dx = -dF1/dx.
    """
    X = _check_input(model, X)
    p = _sigmoid(logits(model, X))
    dz = logit_input_grad(model, X)
    d_f1 = (p * (1.0 - p))[:, None] * dz
    return np.stack([-d_f1, d_f1], axis=1)


class _AdamState:
    def __init__(self, model: MlpModel, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m_w = [np.zeros_like(w) for w in model.weights]
        self.v_w = [np.zeros_like(w) for w in model.weights]
        self.m_b = [np.zeros_like(b) for b in model.biases]
        self.v_b = [np.zeros_like(b) for b in model.biases]

    def step(self, model: MlpModel, gw, gb, lr: float):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for i in range(model.n_layers):
            for g, m, v, param in (
                (gw[i], self.m_w[i], self.v_w[i], model.weights[i]),
                (gb[i], self.m_b[i], self.v_b[i], model.biases[i]),
            ):
                m *= self.beta1
                m += (1.0 - self.beta1) * g
                v *= self.beta2
                v += (1.0 - self.beta2) * g * g
                param -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _sgd_step(model: MlpModel, gw, gb, lr: float):
    for i in range(model.n_layers):
        model.weights[i] -= lr * gw[i]
        model.biases[i] -= lr * gb[i]


def train(
    model: MlpModel,
    data: Dataset,
    config: TrainConfig,
    validation: Dataset | None = None,
) -> tuple[MlpModel, TrainHistory]:
    """Mini-batch training on BCE; returns a new model, input left untouched.

    If no explicit validation set is given, the validation fraction from the
    config is carved off deterministically before training. Per-epoch history
    records full-pass metrics on the training and validation subsets.
    """
    X = _check_input(model, data.X)
    y = np.asarray(data.y, dtype=np.float64).ravel()
    if y.shape[0] != X.shape[0]:
        raise ShapeMismatch(f"X has {X.shape[0]} rows, y has {y.shape[0]}")

    rng = np.random.default_rng(config.seed)
    if validation is None:
        n_val = int(X.shape[0] * config.validation_split)
        n_val = min(max(n_val, 1), X.shape[0] - 1)
        perm = rng.permutation(X.shape[0])
        val_idx, tr_idx = perm[:n_val], perm[n_val:]
        X_val, y_val = X[val_idx], y[val_idx]
        X_tr, y_tr = X[tr_idx], y[tr_idx]
    else:
        X_val = _check_input(model, validation.X)
        y_val = np.asarray(validation.y, dtype=np.float64).ravel()
        X_tr, y_tr = X, y

    model = model.copy()
    history = TrainHistory()
    if config.epochs == 0:
        return model, history

    adam = _AdamState(model) if config.optimizer == "adam" else None
    n_tr = X_tr.shape[0]
    for _ in range(config.epochs):
        order = rng.permutation(n_tr)
        for start in range(0, n_tr, config.batch_size):
            idx = order[start : start + config.batch_size]
            gw, gb, _, _ = _backprop(model, X_tr[idx], y_tr[idx])
            if adam is not None:
                adam.step(model, gw, gb, config.learning_rate)
            else:
                _sgd_step(model, gw, gb, config.learning_rate)
        p_tr = forward(model, X_tr)
        p_val = forward(model, X_val)
        tr_loss = loss_bce(p_tr, y_tr)
        val_loss = loss_bce(p_val, y_val)
        if not (np.isfinite(tr_loss) and np.isfinite(val_loss)):
            raise Diverged(f"non-finite loss after epoch {len(history.train_loss) + 1}")
        history.train_loss.append(tr_loss)
        history.train_accuracy.append(float(np.mean((p_tr >= 0.5) == (y_tr == 1))))
        history.val_loss.append(val_loss)
        history.val_accuracy.append(float(np.mean((p_val >= 0.5) == (y_val == 1))))
    if any(not np.isfinite(w).all() for w in model.weights):
        raise Diverged("non-finite parameters after training")
    return model, history


def save_model(model: MlpModel, path) -> None:
    """Write the checkpoint format documented in the README; bitwise stable."""
    dims = model.layer_dims
    blob = bytearray()
    blob += _CKPT_MAGIC
    blob += struct.pack("<I", _CKPT_VERSION)
    blob += struct.pack("<I", len(dims))
    blob += struct.pack(f"<{len(dims)}I", *dims)
    blob += struct.pack(
        "<BB", _ACT_CODES[model.hidden_activation], _ACT_CODES[model.output_activation]
    )
    for w, b in zip(model.weights, model.biases):
        blob += np.ascontiguousarray(w, dtype="<f8").tobytes()
        blob += np.ascontiguousarray(b, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(blob))


def load_model(path) -> MlpModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != _CKPT_MAGIC:
        raise IoFailure(f"{path}: not a model checkpoint")
    (version,) = struct.unpack_from("<I", blob, 8)
    if version != _CKPT_VERSION:
        raise IoFailure(f"{path}: unsupported checkpoint version {version}")
    (n_dims,) = struct.unpack_from("<I", blob, 12)
    dims = list(struct.unpack_from(f"<{n_dims}I", blob, 16))
    offset = 16 + 4 * n_dims
    hidden_code, output_code = struct.unpack_from("<BB", blob, offset)
    offset += 2
    weights, biases = [], []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        w = np.frombuffer(blob, dtype="<f8", count=d_in * d_out, offset=offset).reshape(d_in, d_out)
        offset += 8 * d_in * d_out
        b = np.frombuffer(blob, dtype="<f8", count=d_out, offset=offset)
        offset += 8 * d_out
        weights.append(w.copy())
        biases.append(b.copy())
    return MlpModel(
        layer_dims=dims,
        weights=weights,
        biases=biases,
        hidden_activation=_ACT_NAMES[hidden_code],
        output_activation=_ACT_NAMES[output_code],
    )

"""Multilayer perceptron with Leaky-ReLU hidden layers, trained by minibatch SGD on MSE.

Everything is float64 numpy. Weights are stored as (fan_in, fan_out)
matrices so a batch ``x`` of shape (rows, fan_in) maps to ``x @ W + b``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_HIDDEN = (64, 64, 64, 64, 64)
DEFAULT_LEAK = 0.01


class InvalidDims(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class EmptyInput(ValueError):
    pass


class DivergedLoss(FloatingPointError):
    def __init__(self, epoch, value):
        self.epoch = epoch
        super().__init__(f"loss became {value} at epoch {epoch}")


@dataclass
class MlpModel:
    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    leak: float = DEFAULT_LEAK

    def __post_init__(self):
        if not 0 < self.leak < 1:
            raise ValueError("leak must lie in (0, 1)")
        if len(self.weights) != len(self.layer_dims) - 1 or len(self.biases) != len(self.weights):
            raise InvalidDims("weights/biases do not match layer_dims")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            shape = (self.layer_dims[k], self.layer_dims[k + 1])
            if w.shape != shape or b.shape != (shape[1],):
                raise InvalidDims(f"layer {k}: expected weight {shape}, got {w.shape}")

    def copy(self) -> MlpModel:
        return MlpModel(list(self.layer_dims), [w.copy() for w in self.weights],
                        [b.copy() for b in self.biases], self.leak)

    def to_dict(self) -> dict:
        return {
            "layer_dims": list(self.layer_dims),
            "leak": self.leak,
            "weights": [w.ravel().tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d) -> MlpModel:
        dims = [int(v) for v in d["layer_dims"]]
        weights = [np.asarray(w, dtype=float).reshape(dims[k], dims[k + 1])
                   for k, w in enumerate(d["weights"])]
        biases = [np.asarray(b, dtype=float) for b in d["biases"]]
        return cls(dims, weights, biases, float(d["leak"]))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.3
    batch_size: int = 64
    epochs: int = 600
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError(f"invalid training config {self}")


@dataclass
class TrainTrace:
    epoch: list[int] = field(default_factory=list)
    train_mse: list[float] = field(default_factory=list)
    val_mse: list[float] = field(default_factory=list)
    val_mae: list[float] = field(default_factory=list)
    best_epoch: int = 0

    def record(self, epoch, train_mse, val_mse, val_mae):
        self.epoch.append(epoch)
        self.train_mse.append(train_mse)
        self.val_mse.append(val_mse)
        self.val_mae.append(val_mae)
        if not self.best_epoch or val_mse < self.val_mse[self.best_epoch - 1]:
            self.best_epoch = epoch

    def to_csv(self) -> str:
        rows = ["epoch,train_mse,val_mse,val_mae"]
        rows += [f"{e},{a!r},{b!r},{c!r}" for e, a, b, c in
                 zip(self.epoch, self.train_mse, self.val_mse, self.val_mae)]
        return "\n".join(rows) + "\n"


def init_model(layer_dims, leak: float = DEFAULT_LEAK, seed: int = 0) -> MlpModel:
    dims = [int(d) for d in layer_dims]
    if len(dims) < 2 or min(dims) < 1:
        raise InvalidDims(f"need at least input and output widths >= 1, got {layer_dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(dims, weights, biases, leak)


def _leaky(z, leak):
    return np.where(z > 0, z, leak * z)


def _forward_trace(model: MlpModel, x: np.ndarray):
    pre, acts = [], [x]
    last = len(model.weights) - 1
    for k, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = acts[-1] @ w + b
        pre.append(z)
        acts.append(z if k == last else _leaky(z, model.leak))
    return pre, acts


def forward(model: MlpModel, x) -> np.ndarray:
    """Hidden layers: affine + Leaky ReLU; output layer: affine only."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.layer_dims[0]:
        raise DimensionMismatch(f"expected {model.layer_dims[0]} inputs, got {x.shape[-1]}")
    return _forward_trace(model, x)[1][-1]


def loss_mse(y_true, y_pred) -> float:
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.size == 0:
        raise EmptyInput("MSE of an empty vector")
    if y_true.shape != y_pred.shape:
        raise DimensionMismatch(f"{y_true.shape} vs {y_pred.shape}")
    return float(np.mean((y_true - y_pred) ** 2))


def gradients(model: MlpModel, x, y):
    """Gradients of ``loss_mse(y, forward(model, x))`` for each layer.

    The loss averages over every entry of the batch. The Leaky-ReLU
    derivative at exactly zero is taken as ``leak``.
    """
    return _loss_and_gradients(model, x, y)[1:]


def _loss_and_gradients(model, x, y):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if x.shape[0] == 0:
        raise EmptyInput("empty batch")
    if x.shape[1] != model.layer_dims[0] or y.shape != (x.shape[0], model.layer_dims[-1]):
        raise DimensionMismatch("batch shape does not match model dims")
    pre, acts = _forward_trace(model, x)
    delta = 2.0 * (acts[-1] - y) / y.size
    gw = [None] * len(model.weights)
    gb = [None] * len(model.weights)
    for k in range(len(model.weights) - 1, -1, -1):
        gw[k] = acts[k].T @ delta
        gb[k] = delta.sum(axis=0)
        if k:
            delta = (delta @ model.weights[k].T) * np.where(pre[k - 1] > 0, 1.0, model.leak)
    return float(np.mean((acts[-1] - y) ** 2)), gw, gb


def train(model: MlpModel, train_x, train_y, val_x, val_y, cfg: TrainConfig,
          on_epoch=None) -> tuple[MlpModel, TrainTrace]:
    """Plain minibatch SGD for ``cfg.epochs`` epochs; the input model is not modified.

    The recorded ``train_mse`` of an epoch is the sample-weighted mean of its
    minibatch losses (each taken before that batch's update); validation
    metrics use the end-of-epoch weights.

    ``on_epoch(epoch, train_mse, val_mse)`` is called after every epoch when given.
    """
    model = model.copy()
    train_x = np.asarray(train_x, dtype=float)
    train_y = np.asarray(train_y, dtype=float)
    if train_x.shape[1] != model.layer_dims[0] or train_y.shape[1] != model.layer_dims[-1]:
        raise DimensionMismatch("training data does not match model dims")
    rng = np.random.default_rng(cfg.seed)
    n = train_x.shape[0]
    trace = TrainTrace()
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        # overflow surfaces as a non-finite loss below
        with np.errstate(over="ignore", invalid="ignore"):
            for start in range(0, n, cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                loss, gw, gb = _loss_and_gradients(model, train_x[idx], train_y[idx])
                total += loss * len(idx)
                for k in range(len(model.weights)):
                    model.weights[k] -= cfg.learning_rate * gw[k]
                    model.biases[k] -= cfg.learning_rate * gb[k]
            tr = total / n
            pred = forward(model, val_x)
            va = loss_mse(val_y, pred)
            mae = float(np.mean(np.abs(np.asarray(val_y) - pred)))
        if not (np.isfinite(tr) and np.isfinite(va)):
            raise DivergedLoss(epoch, tr if not np.isfinite(tr) else va)
        trace.record(epoch, tr, va, mae)
        if on_epoch is not None:
            on_epoch(epoch, tr, va)
    return model, trace


def predict_pf(model: MlpModel, in_scaler, out_scaler, raw_input):
    """Raw input vector(s) to (voltage magnitudes in pu, from-side flows in MW)."""
    raw = np.asarray(raw_input, dtype=float)
    if raw.shape[-1] != model.layer_dims[0] or raw.shape[-1] % 3:
        raise DimensionMismatch(f"expected {model.layer_dims[0]} raw inputs, got {raw.shape[-1]}")
    n_bus = raw.shape[-1] // 3
    out = out_scaler.denormalize(forward(model, in_scaler.normalize(raw)))
    return out[..., :n_bus], out[..., n_bus:]

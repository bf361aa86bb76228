"""Small fully connected network trained by minibatch SGD.

ReLU hidden layers, linear output head for regression (targets are
standardized internally and de-standardized at predict time) and a
sigmoid head with logistic loss for classification.  Fixed learning
rate, He-normal init from the deterministic stream, early stopping on
validation loss with best-weight restore.

`loss_and_grads` is the single source of gradients; tests check it
against central finite differences.
"""
from __future__ import annotations

import numpy as np

from ..errors import DataError
from ..rng import Rng
from ..table import Table
from .base import ModelSpec, TrainedModel, check_target, training_arrays

_P_CLIP = 1e-12


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def init_params(layer_sizes: list[int], rng: Rng) -> list[tuple[np.ndarray, np.ndarray]]:
    """He-normal weights, zero biases; one (W, b) pair per layer."""
    params = []
    for i, (fan_in, fan_out) in enumerate(zip(layer_sizes[:-1], layer_sizes[1:])):
        std = np.sqrt(2.0 / fan_in) if i < len(layer_sizes) - 2 else np.sqrt(1.0 / fan_in)
        w = rng.spawn(2 * i + 1).normal_block(fan_in * fan_out).reshape(fan_in, fan_out) * std
        b = np.zeros(fan_out)
        params.append((w, b))
    return params


def forward(params, X: np.ndarray) -> np.ndarray:
    """Network output before the task head (linear margin), shape (n,)."""
    a = X
    for w, b in params[:-1]:
        a = np.maximum(a @ w + b, 0.0)
    w, b = params[-1]
    return (a @ w + b)[:, 0]


def loss_and_grads(params, X: np.ndarray, y: np.ndarray, task: str):
    """Mean loss and its gradients w.r.t. every weight and bias.

    Regression: 0.5 * mean((margin - y)^2).  Classification: mean logistic
    loss of sigmoid(margin).  Both give d(loss)/d(margin) = (pred - y)/n,
    which backpropagates through the shared linear/ReLU stack.
    """
    n = len(y)
    activations = [X]
    a = X
    for w, b in params[:-1]:
        a = np.maximum(a @ w + b, 0.0)
        activations.append(a)
    w_out, b_out = params[-1]
    margin = (a @ w_out + b_out)[:, 0]

    if task == "binary_classification":
        p = _sigmoid(margin)
        pc = np.clip(p, _P_CLIP, 1.0 - _P_CLIP)
        loss = float(-np.mean(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)))
        delta = (p - y)[:, None] / n
    else:
        loss = float(0.5 * np.mean((margin - y) ** 2))
        delta = (margin - y)[:, None] / n

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(params)
    for i in range(len(params) - 1, -1, -1):
        w, _ = params[i]
        a_prev = activations[i]
        grads[i] = (a_prev.T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = (delta @ w.T) * (activations[i] > 0.0)
    return loss, grads


class MlpModel(TrainedModel):
    def __init__(self, spec, feature_names, metadata, params, y_center, y_scale):
        super().__init__(spec, feature_names, metadata)
        self.params = params
        self.y_center = y_center
        self.y_scale = y_scale

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        margin = forward(self.params, np.asarray(X, dtype=np.float64))
        if self.spec.task == "binary_classification":
            return _sigmoid(margin)
        return margin * self.y_scale + self.y_center

    def state_dict(self) -> dict:
        return {
            "weights": [[w.tolist(), b.tolist()] for w, b in self.params],
            "y_center": self.y_center,
            "y_scale": self.y_scale,
        }

    @staticmethod
    def from_dict(d: dict) -> "MlpModel":
        params = [
            (np.asarray(w, dtype=np.float64), np.asarray(b, dtype=np.float64))
            for w, b in d["state"]["weights"]
        ]
        return MlpModel(
            spec=ModelSpec.from_dict(d["spec"]),
            feature_names=d["feature_names"],
            metadata=d["metadata"],
            params=params,
            y_center=d["state"]["y_center"],
            y_scale=d["state"]["y_scale"],
        )


def train_mlp(spec: ModelSpec, train: Table, validation: Table) -> MlpModel:
    if validation is None or validation.n_rows == 0:
        raise DataError("mlp training requires a nonempty validation table")
    X, y_raw, names = training_arrays(train)
    check_target(spec.task, y_raw)
    Xv, yv_raw, _ = training_arrays(validation)
    hp = spec.resolved_hyperparameters()

    if spec.task == "regression":
        y_center = float(y_raw.mean())
        y_scale = float(y_raw.std()) or 1.0
        y = (y_raw - y_center) / y_scale
        yv = (yv_raw - y_center) / y_scale
    else:
        y_center, y_scale = 0.0, 1.0
        y, yv = y_raw, yv_raw

    sizes = [X.shape[1]] + [hp["units"]] * hp["layers"] + [1]
    rng = Rng(spec.seed)
    params = init_params(sizes, rng.spawn(0))
    lr = hp["learning_rate"]
    batch = hp["batch"]
    patience = hp["patience"]
    n = len(y)

    train_curve, val_curve = [], []
    best_loss, best_epoch = np.inf, 0
    best_params = [(w.copy(), b.copy()) for w, b in params]
    for epoch in range(hp["epochs"]):
        perm = rng.spawn(epoch + 1).permutation(n)
        for start in range(0, n, batch):
            rows = perm[start : start + batch]
            _, grads = loss_and_grads(params, X[rows], y[rows], spec.task)
            params = [
                (w - lr * gw, b - lr * gb) for (w, b), (gw, gb) in zip(params, grads)
            ]
        train_loss, _ = loss_and_grads(params, X, y, spec.task)
        val_loss, _ = loss_and_grads(params, Xv, yv, spec.task)
        train_curve.append(train_loss)
        val_curve.append(val_loss)
        if val_loss < best_loss - 1e-12:
            best_loss, best_epoch = val_loss, epoch + 1
            best_params = [(w.copy(), b.copy()) for w, b in params]
        elif patience > 0 and (epoch + 1) - best_epoch >= patience:
            break

    if patience > 0:
        params = best_params
        stopped = best_epoch if best_epoch < len(train_curve) else None
    else:
        stopped = None
    metadata = {
        "iterations_used": len(train_curve),
        "early_stop_round": stopped,
        "loss_curve": train_curve,
        "validation_curve": val_curve,
    }
    return MlpModel(spec, names, metadata, params, y_center, y_scale)

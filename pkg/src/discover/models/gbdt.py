"""Gradient-boosted trees: exact greedy splits, Newton leaf weights.

Squared loss for regression (base score = target mean) and logistic loss
for binary classification (base score = log-odds).  Each round fits one
tree to the current first/second derivatives with L2 leaf regularization,
then adds learning_rate * tree to the margin, so predictions after k+1
rounds equal predictions after k rounds plus the round-(k+1) contribution
exactly.  Early stopping keeps the best-validation round when `patience`
is positive.
"""
from __future__ import annotations

import numpy as np

from ..errors import DataError
from ..rng import Rng
from ..table import Table
from .base import ModelSpec, TrainedModel, check_target, training_arrays
from .trees import TreeNode, build_tree, predict_tree

_H_FLOOR = 1e-16
_P_CLIP = 1e-12


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _log_loss(y: np.ndarray, p: np.ndarray) -> float:
    p = np.clip(p, _P_CLIP, 1.0 - _P_CLIP)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


class GbdtModel(TrainedModel):
    def __init__(self, spec, feature_names, metadata, base_score, learning_rate, trees):
        super().__init__(spec, feature_names, metadata)
        self.base_score = base_score
        self.learning_rate = learning_rate
        self.trees = trees

    def predict_margin(self, X: np.ndarray, n_rounds: int | None = None) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if n_rounds is None:
            n_rounds = len(self.trees)
        margin = np.full(len(X), self.base_score)
        for tree in self.trees[:n_rounds]:
            margin = margin + self.learning_rate * predict_tree(tree, X)
        return margin

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        margin = self.predict_margin(X)
        if self.spec.task == "binary_classification":
            return _sigmoid(margin)
        return margin

    def state_dict(self) -> dict:
        return {
            "base_score": self.base_score,
            "learning_rate": self.learning_rate,
            "trees": [t.to_dict() for t in self.trees],
        }

    @staticmethod
    def from_dict(d: dict) -> "GbdtModel":
        return GbdtModel(
            spec=ModelSpec.from_dict(d["spec"]),
            feature_names=d["feature_names"],
            metadata=d["metadata"],
            base_score=d["state"]["base_score"],
            learning_rate=d["state"]["learning_rate"],
            trees=[TreeNode.from_dict(t) for t in d["state"]["trees"]],
        )


def train_gbdt(spec: ModelSpec, train: Table, validation: Table) -> GbdtModel:
    if validation is None or validation.n_rows == 0:
        raise DataError("gbdt training requires a nonempty validation table")
    X, y, names = training_arrays(train)
    return _fit_gbdt(spec, X, y, names, validation)


def _fit_gbdt(
    spec: ModelSpec,
    X: np.ndarray,
    y: np.ndarray,
    feature_names: list[str],
    validation: Table | None,
    check_degenerate: bool = True,
) -> GbdtModel:
    if check_degenerate:
        check_target(spec.task, y)
    hp = spec.resolved_hyperparameters()
    classification = spec.task == "binary_classification"

    if classification:
        p0 = float(np.clip(y.mean(), 1e-6, 1.0 - 1e-6))
        base = float(np.log(p0 / (1.0 - p0)))
    else:
        base = float(y.mean())

    if validation is not None:
        Xv, yv, _ = training_arrays(validation)
        margin_v = np.full(len(yv), base)
    else:
        Xv = yv = margin_v = None

    n = len(y)
    n_sub = max(1, int(round(hp["subsample"] * n)))
    lr = hp["learning_rate"]
    rng = Rng(spec.seed)

    margin = np.full(n, base)
    trees: list[TreeNode] = []
    train_curve: list[float] = []
    val_curve: list[float] = []
    best_round, best_loss = 0, np.inf
    patience = hp["patience"]

    for k in range(hp["trees"]):
        if classification:
            p = _sigmoid(margin)
            g = p - y
            h = np.maximum(p * (1.0 - p), _H_FLOOR)
        else:
            g = margin - y
            h = np.ones(n)

        round_rng = rng.spawn(k + 1)
        if n_sub < n:
            rows = np.sort(round_rng.choice_without_replacement(n, n_sub))
        else:
            rows = np.arange(n)
        tree = build_tree(
            X[rows],
            g[rows],
            h[rows],
            reg_lambda=hp["reg_lambda"],
            max_depth=hp["depth"],
            leaf_min=hp["leaf_min"],
            n_split_features=X.shape[1],
            rng=round_rng,
        )
        trees.append(tree)
        margin = margin + lr * predict_tree(tree, X)
        if classification:
            train_curve.append(_log_loss(y, _sigmoid(margin)))
        else:
            train_curve.append(float(np.mean((margin - y) ** 2)))

        if margin_v is not None:
            margin_v = margin_v + lr * predict_tree(tree, Xv)
            if classification:
                loss = _log_loss(yv, _sigmoid(margin_v))
            else:
                loss = float(np.mean((margin_v - yv) ** 2))
            val_curve.append(loss)
            if loss < best_loss - 1e-12:
                best_loss, best_round = loss, k + 1
            elif patience > 0 and (k + 1) - best_round >= patience:
                break
        else:
            best_round = k + 1

    if margin_v is not None and patience > 0:
        kept = best_round
    else:
        kept = len(trees)
    metadata = {
        "iterations_used": len(trees),
        "early_stop_round": kept if kept < len(trees) else None,
        "loss_curve": train_curve,
        "validation_curve": val_curve,
        "base_score": base,
    }
    return GbdtModel(spec, feature_names, metadata, base, lr, trees[:kept])

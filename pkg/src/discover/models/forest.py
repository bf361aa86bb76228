"""Random forest for regression and binary classification.

Trees are variance-reduction CARTs with mean-value leaves; on 0/1 targets
this split criterion coincides with Gini, and averaging leaf fractions
across trees yields class-1 probabilities.  Per-tree row subsampling is
without replacement; per-node feature subsampling defaults to sqrt(p) for
classification and p/3 for regression.  Per-tree seeds are derived from
the spec seed by counter, so results do not depend on build order.
"""
from __future__ import annotations

import numpy as np

from ..rng import Rng
from ..table import Table
from .base import ModelSpec, TrainedModel, check_target, training_arrays
from .trees import TreeNode, build_tree, predict_tree


def _n_split_features(fraction, p: int, task: str) -> int:
    if fraction == "auto":
        k = np.sqrt(p) if task == "binary_classification" else p / 3.0
    else:
        k = fraction * p
    return max(1, min(p, int(round(k))))


class ForestModel(TrainedModel):
    def __init__(self, spec, feature_names, metadata, trees, target_range):
        super().__init__(spec, feature_names, metadata)
        self.trees = trees
        self.target_range = target_range

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        total = np.zeros(len(X))
        for tree in self.trees:
            total += predict_tree(tree, X)
        out = total / len(self.trees)
        if self.spec.task == "binary_classification":
            return np.clip(out, 0.0, 1.0)
        return out

    def state_dict(self) -> dict:
        return {
            "trees": [t.to_dict() for t in self.trees],
            "target_range": list(self.target_range),
        }

    @staticmethod
    def from_dict(d: dict) -> "ForestModel":
        return ForestModel(
            spec=ModelSpec.from_dict(d["spec"]),
            feature_names=d["feature_names"],
            metadata=d["metadata"],
            trees=[TreeNode.from_dict(t) for t in d["state"]["trees"]],
            target_range=tuple(d["state"]["target_range"]),
        )


def train_forest(spec: ModelSpec, train: Table, validation: Table | None = None) -> ForestModel:
    X, y, names = training_arrays(train)
    check_target(spec.task, y)
    hp = spec.resolved_hyperparameters()
    n, p = X.shape
    k_feat = _n_split_features(hp["feature_fraction"], p, spec.task)
    n_sub = max(1, int(round(hp["subsample"] * n)))

    root_rng = Rng(spec.seed)
    trees: list[TreeNode] = []
    for k in range(hp["trees"]):
        tree_rng = root_rng.spawn(k + 1)
        if n_sub < n:
            rows = np.sort(tree_rng.choice_without_replacement(n, n_sub))
        else:
            rows = np.arange(n)
        trees.append(
            build_tree(
                X[rows],
                -y[rows],
                np.ones(len(rows)),
                reg_lambda=0.0,
                max_depth=hp["depth"],
                leaf_min=hp["leaf_min"],
                n_split_features=k_feat,
                rng=tree_rng,
            )
        )
    metadata = {"iterations_used": hp["trees"], "early_stop_round": None, "loss_curve": []}
    return ForestModel(spec, names, metadata, trees, (float(y.min()), float(y.max())))

"""Self-contained model zoo with uniform train/predict/importance interfaces."""
from __future__ import annotations

from ..errors import ConfigError
from ..table import Table
from .base import FAMILIES, TASKS, ModelSpec, TrainedModel
from .forest import ForestModel, train_forest
from .gbdt import GbdtModel, train_gbdt
from .importance import permutation_importance
from .mlp import MlpModel, train_mlp

_TRAINERS = {
    "random_forest": train_forest,
    "gbdt": train_gbdt,
    "mlp": train_mlp,
}

_MODEL_CLASSES = {
    "random_forest": ForestModel,
    "gbdt": GbdtModel,
    "mlp": MlpModel,
}


def train(spec: ModelSpec, train_table: Table, validation: Table | None = None) -> TrainedModel:
    """Train a model of the spec's family; gbdt and mlp early-stop on the
    validation table, the forest trains to completion."""
    return _TRAINERS[spec.family](spec, train_table, validation)


def model_from_dict(d: dict) -> TrainedModel:
    family = d["spec"]["family"]
    if family not in _MODEL_CLASSES:
        raise ConfigError(f"unknown model family {family!r} in artifact")
    return _MODEL_CLASSES[family].from_dict(d)


__all__ = [
    "FAMILIES",
    "TASKS",
    "ModelSpec",
    "TrainedModel",
    "ForestModel",
    "GbdtModel",
    "MlpModel",
    "train",
    "train_forest",
    "train_gbdt",
    "train_mlp",
    "model_from_dict",
    "permutation_importance",
]

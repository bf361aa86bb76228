"""Model specs and the uniform trained-model interface.

All models are trained from scratch on the given tables; there are no
pretrained weights anywhere.  A TrainedModel predicts real values for
regression and class-1 probabilities for binary classification, exposes
its training metadata, and serializes to a self-describing JSON dict.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, DataError, DegenerateTargetError, SchemaError
from ..preprocess import feature_matrix
from ..table import Table

FAMILIES = ("random_forest", "gbdt", "mlp")
TASKS = ("regression", "binary_classification")

# family -> hyperparameter -> (default, validator)
_HP_SPECS = {
    "random_forest": {
        "trees": (200, lambda v: isinstance(v, int) and 1 <= v <= 10_000),
        "depth": (None, lambda v: v is None or (isinstance(v, int) and 1 <= v <= 64)),
        "leaf_min": (1, lambda v: isinstance(v, int) and v >= 1),
        "subsample": (0.8, lambda v: 0.0 < v <= 1.0),
        "feature_fraction": (
            "auto",
            lambda v: v == "auto" or (isinstance(v, (int, float)) and 0.0 < v <= 1.0),
        ),
    },
    "gbdt": {
        "trees": (300, lambda v: isinstance(v, int) and 1 <= v <= 20_000),
        "depth": (4, lambda v: isinstance(v, int) and 1 <= v <= 32),
        "learning_rate": (0.1, lambda v: 0.0 < v <= 1.0),
        "leaf_min": (5, lambda v: isinstance(v, int) and v >= 1),
        "subsample": (1.0, lambda v: 0.0 < v <= 1.0),
        "reg_lambda": (1.0, lambda v: v >= 0.0),
        "patience": (25, lambda v: isinstance(v, int) and v >= 0),
    },
    "mlp": {
        "layers": (2, lambda v: isinstance(v, int) and 1 <= v <= 8),
        "units": (64, lambda v: isinstance(v, int) and 1 <= v <= 1024),
        "epochs": (200, lambda v: isinstance(v, int) and v >= 1),
        "batch": (64, lambda v: isinstance(v, int) and v >= 1),
        "learning_rate": (1e-3, lambda v: 0.0 < v <= 1.0),
        "patience": (20, lambda v: isinstance(v, int) and v >= 0),
    },
}


@dataclass(frozen=True)
class ModelSpec:
    family: str
    task: str
    hyperparameters: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown model family {self.family!r}")
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        legal = _HP_SPECS[self.family]
        for key, value in self.hyperparameters.items():
            if key not in legal:
                raise ConfigError(
                    f"unknown hyperparameter {key!r} for family {self.family!r}"
                )
            if not legal[key][1](value):
                raise ConfigError(
                    f"hyperparameter {key}={value!r} outside the legal range for {self.family}"
                )

    def resolved_hyperparameters(self) -> dict:
        out = {k: default for k, (default, _) in _HP_SPECS[self.family].items()}
        out.update(self.hyperparameters)
        return out

    def key(self) -> str:
        """Stable ordering key for deterministic tie-breaking."""
        hp = self.resolved_hyperparameters()
        parts = [self.family, self.task, str(self.seed)]
        parts += [f"{k}={hp[k]}" for k in sorted(hp)]
        return "|".join(parts)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "task": self.task,
            "hyperparameters": dict(self.hyperparameters),
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "ModelSpec":
        return ModelSpec(
            family=d["family"],
            task=d["task"],
            hyperparameters=dict(d["hyperparameters"]),
            seed=d["seed"],
        )


class TrainedModel:
    """Common behavior for fitted models: layout checks and prediction."""

    def __init__(self, spec: ModelSpec, feature_names: list[str], metadata: dict):
        self.spec = spec
        self.feature_names = list(feature_names)
        self.metadata = dict(metadata)

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict(self, rows: Table) -> np.ndarray:
        X, names = feature_matrix(rows)
        if names != self.feature_names:
            raise SchemaError(
                "feature layout mismatch: model was trained on "
                f"{len(self.feature_names)} columns, table provides {len(names)}"
                + ("" if len(names) != len(self.feature_names) else " (different names/order)")
            )
        return self.predict_matrix(X)

    def state_dict(self) -> dict:
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "feature_names": list(self.feature_names),
            "metadata": dict(self.metadata),
            "state": self.state_dict(),
        }


def check_target(task: str, y: np.ndarray) -> None:
    if len(y) == 0:
        raise DataError("empty training target")
    if task == "binary_classification":
        classes = np.unique(y)
        if not np.isin(classes, (0.0, 1.0)).all():
            raise DataError("classification target must be 0/1 encoded")
        if len(classes) < 2:
            raise DegenerateTargetError(
                "classification target has a single class", kind="single_class"
            )
    else:
        if float(np.var(y)) == 0.0:
            raise DegenerateTargetError(
                "regression target has zero variance", kind="zero_variance"
            )


def training_arrays(train: Table) -> tuple[np.ndarray, np.ndarray, list[str]]:
    X, names = feature_matrix(train)
    y = train.target_values()
    if train.mask(train.target_name).any():
        raise DataError("training target contains missing values")
    return X, y, names

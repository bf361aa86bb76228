"""Evaluation metrics: accuracy, F1, precision, recall, AUC, RMSE, R2, MAE.

Classification point metrics use a fixed 0.5 probability threshold (the
threshold is recorded in run reports).  AUC is the Mann-Whitney statistic
of the scores with half credit for ties, i.e. the probability that a
random positive outranks a random negative.  Metrics that are undefined
for an input (AUC with one class, R2 with constant truth) are reported as
None rather than raising.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .stats import _midranks

CLASSIFICATION_METRICS = ("accuracy", "f1", "precision", "recall", "auc")
REGRESSION_METRICS = ("rmse", "r2", "mae")
HIGHER_IS_BETTER = {
    "accuracy": True,
    "f1": True,
    "precision": True,
    "recall": True,
    "auc": True,
    "rmse": False,
    "mae": False,
    "r2": True,
}


@dataclass(frozen=True)
class MetricSet:
    task: str  # "regression" | "binary_classification"
    values: dict  # metric id -> float | None

    def __getitem__(self, key: str):
        return self.values[key]

    def to_dict(self) -> dict:
        return {"task": self.task, "values": dict(self.values)}

    @staticmethod
    def from_dict(d: dict) -> "MetricSet":
        return MetricSet(task=d["task"], values=dict(d["values"]))


def metric_ids_for_task(task: str) -> tuple[str, ...]:
    if task == "binary_classification":
        return CLASSIFICATION_METRICS
    if task == "regression":
        return REGRESSION_METRICS
    raise DataError(f"unknown task {task!r}")


def auc_score(labels: np.ndarray, scores: np.ndarray) -> float | None:
    """Rank-based AUC with midrank tie handling; None if one class only."""
    labels = np.asarray(labels, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        return None
    ranks, _, _ = _midranks(scores)
    rank_sum_pos = float(ranks[labels == 1].sum())
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def classification_metrics(
    labels: np.ndarray, scores: np.ndarray, threshold: float = 0.5
) -> MetricSet:
    labels = np.asarray(labels, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    if len(labels) == 0 or len(labels) != len(scores):
        raise DataError("labels and scores must be nonempty arrays of equal length")
    if not np.isin(labels, (0.0, 1.0)).all():
        raise DataError("labels must be 0/1")

    pred = scores >= threshold
    pos = labels == 1.0
    tp = float(np.count_nonzero(pred & pos))
    fp = float(np.count_nonzero(pred & ~pos))
    fn = float(np.count_nonzero(~pred & pos))
    tn = float(np.count_nonzero(~pred & ~pos))

    accuracy = (tp + tn) / len(labels)
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return MetricSet(
        task="binary_classification",
        values={
            "accuracy": accuracy,
            "f1": f1,
            "precision": precision,
            "recall": recall,
            "auc": auc_score(labels, scores),
        },
    )


def regression_metrics(truth: np.ndarray, predictions: np.ndarray) -> MetricSet:
    truth = np.asarray(truth, dtype=np.float64)
    predictions = np.asarray(predictions, dtype=np.float64)
    if len(truth) == 0 or len(truth) != len(predictions):
        raise DataError("truth and predictions must be nonempty arrays of equal length")

    err = predictions - truth
    rmse = float(np.sqrt(np.mean(err**2)))
    mae = float(np.mean(np.abs(err)))
    sst = float(np.sum((truth - truth.mean()) ** 2))
    r2 = 1.0 - float(np.sum(err**2)) / sst if sst > 0 else None
    return MetricSet(task="regression", values={"rmse": rmse, "r2": r2, "mae": mae})


def compute_metrics(task: str, truth: np.ndarray, predictions: np.ndarray) -> MetricSet:
    if task == "binary_classification":
        return classification_metrics(truth, predictions)
    if task == "regression":
        return regression_metrics(truth, predictions)
    raise DataError(f"unknown task {task!r}")


def primary_score(metrics: MetricSet, metric_id: str) -> float:
    """Scalar used for leaderboard comparison; undefined metrics score worst."""
    v = metrics.values.get(metric_id)
    if v is None:
        return -np.inf if HIGHER_IS_BETTER[metric_id] else np.inf
    return float(v)

"""Model-agnostic permutation feature importance.

Importance of a feature = mean degradation of a holdout metric over
`repeats` shuffles of that feature's column(s), sign-adjusted so that
larger is always more important.  One-hot blocks that came from a single
source column are shuffled together (same row permutation), giving one
score per original feature.  Permutation streams are derived by
(group, repeat) counters, so results are independent of evaluation order
and worker count.
"""
from __future__ import annotations

import numpy as np

from ..errors import DataError
from ..metrics import HIGHER_IS_BETTER, compute_metrics, primary_score
from ..preprocess import feature_matrix
from ..rng import Rng
from ..table import Table
from .base import TrainedModel


def permutation_importance(
    model: TrainedModel,
    holdout: Table,
    metric: str,
    repeats: int,
    seed: int,
    groups: dict | None = None,
) -> dict:
    """Per-feature importance scores on a preprocessed holdout table.

    `groups` maps a source-feature name to the list of matrix columns it
    produced (defaults to one group per column).  Returns a dict
    source-feature -> mean metric degradation.
    """
    if repeats < 1:
        raise DataError("permutation importance needs repeats >= 1")
    if metric not in HIGHER_IS_BETTER:
        raise DataError(f"unknown metric id {metric!r}")
    if holdout.n_rows == 0:
        raise DataError("holdout table is empty")

    X, names = feature_matrix(holdout)
    if names != model.feature_names:
        raise DataError("holdout feature layout does not match the model")
    y = holdout.target_values()
    col_index = {n: i for i, n in enumerate(names)}
    if groups is None:
        groups = {n: [n] for n in names}

    baseline = primary_score(
        compute_metrics(model.spec.task, y, model.predict_matrix(X)), metric
    )
    sign = 1.0 if HIGHER_IS_BETTER[metric] else -1.0

    rng = Rng(seed)
    scores: dict[str, float] = {}
    for g_idx, (source, members) in enumerate(sorted(groups.items())):
        cols = [col_index[m] for m in members if m in col_index]
        if not cols:
            continue
        group_rng = rng.spawn(g_idx + 1)
        degradations = []
        for r in range(repeats):
            perm = group_rng.spawn(r + 1).permutation(len(y))
            Xp = X.copy()
            Xp[:, cols] = Xp[perm][:, cols]
            score = primary_score(
                compute_metrics(model.spec.task, y, model.predict_matrix(Xp)), metric
            )
            degradations.append(sign * (baseline - score))
        scores[source] = float(np.mean(degradations))
    return scores

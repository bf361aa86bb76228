"""Model search: seeded random grids, hold-out scoring, overfit flags.

Candidates are drawn from fixed per-family grids by a seeded sampler,
trained on the training table and scored on the validation table (the
caller carves that validation slice out of its training data; the final
reporting holdout never drives selection).  Entries whose train/validation
gap exceeds the overfit threshold are excluded from best-model selection
unless every entry is flagged, in which case the best flagged entry wins
and the leaderboard carries a warning.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DiscoverError, PipelineError
from .metrics import (
    HIGHER_IS_BETTER,
    MetricSet,
    compute_metrics,
    metric_ids_for_task,
    primary_score,
)
from .models import ModelSpec, TrainedModel, train as train_model
from .rng import Rng
from .table import Table

FAMILY_ORDER = ("random_forest", "gbdt", "mlp")

OVERFIT_GAP_ABSOLUTE = 0.15  # [0,1]-scale metrics (and r2)
OVERFIT_GAP_RELATIVE = 0.25  # rmse/mae: (val - train) / train


@dataclass(frozen=True)
class SearchBudget:
    max_candidates: int = 24
    per_family: dict | None = None  # family -> candidate count
    time_limit: float | None = None  # soft wall-clock bound, seconds
    seed: int = 0
    overfit_gap_absolute: float = OVERFIT_GAP_ABSOLUTE
    overfit_gap_relative: float = OVERFIT_GAP_RELATIVE

    def __post_init__(self):
        if self.max_candidates < 1:
            raise ConfigError("max_candidates must be >= 1")
        if self.per_family:
            for family in self.per_family:
                if family not in FAMILY_ORDER:
                    raise ConfigError(f"unknown family {family!r} in budget")

    def to_dict(self) -> dict:
        return {
            "max_candidates": self.max_candidates,
            "per_family": dict(self.per_family) if self.per_family else None,
            "time_limit": self.time_limit,
            "seed": self.seed,
            "overfit_gap_absolute": self.overfit_gap_absolute,
            "overfit_gap_relative": self.overfit_gap_relative,
        }

    @staticmethod
    def from_dict(d: dict) -> "SearchBudget":
        return SearchBudget(**d)


@dataclass
class LeaderboardEntry:
    spec: ModelSpec
    validation_metrics: MetricSet | None
    train_metrics: MetricSet | None
    overfit_gap: float | None
    flagged: bool = False
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "validation_metrics": self.validation_metrics.to_dict()
            if self.validation_metrics
            else None,
            "train_metrics": self.train_metrics.to_dict() if self.train_metrics else None,
            "overfit_gap": self.overfit_gap,
            "flagged": self.flagged,
            "error": self.error,
        }

    @staticmethod
    def from_dict(d: dict) -> "LeaderboardEntry":
        return LeaderboardEntry(
            spec=ModelSpec.from_dict(d["spec"]),
            validation_metrics=MetricSet.from_dict(d["validation_metrics"])
            if d["validation_metrics"]
            else None,
            train_metrics=MetricSet.from_dict(d["train_metrics"])
            if d["train_metrics"]
            else None,
            overfit_gap=d["overfit_gap"],
            flagged=d["flagged"],
            error=d["error"],
        )


@dataclass
class Leaderboard:
    entries: list
    best_index: int
    primary_metric: str
    all_flagged: bool = False

    @property
    def best_entry(self) -> LeaderboardEntry:
        return self.entries[self.best_index]

    def to_dict(self) -> dict:
        return {
            "entries": [e.to_dict() for e in self.entries],
            "best_index": self.best_index,
            "primary_metric": self.primary_metric,
            "all_flagged": self.all_flagged,
        }

    @staticmethod
    def from_dict(d: dict) -> "Leaderboard":
        return Leaderboard(
            entries=[LeaderboardEntry.from_dict(e) for e in d["entries"]],
            best_index=d["best_index"],
            primary_metric=d["primary_metric"],
            all_flagged=d["all_flagged"],
        )


# -- candidate sampling -------------------------------------------------------------


def _log_uniform(rng: Rng, lo: float, hi: float) -> float:
    return float(np.exp(np.log(lo) + rng.next_float() * (np.log(hi) - np.log(lo))))


def _choice(rng: Rng, options):
    return options[rng.randint(len(options))]


def _sample_spec(family: str, task: str, rng: Rng, seed: int) -> ModelSpec:
    if family == "random_forest":
        hp = {
            "trees": 100 + rng.randint(401),  # 100..500
            "depth": _choice(rng, [4, 6, 8, 12, 16, None]),
            "leaf_min": _choice(rng, [1, 2, 5]),
            "subsample": _choice(rng, [0.7, 0.8, 1.0]),
        }
    elif family == "gbdt":
        hp = {
            "trees": 100 + rng.randint(1901),  # 100..2000, early stopping active
            "learning_rate": round(_log_uniform(rng, 0.01, 0.3), 6),
            "depth": 2 + rng.randint(7),  # 2..8
            "leaf_min": _choice(rng, [1, 5, 10, 20]),
            "subsample": _choice(rng, [0.7, 0.8, 1.0]),
            "reg_lambda": _choice(rng, [0.0, 0.1, 1.0, 10.0]),
        }
    else:
        hp = {
            "units": _choice(rng, [32, 64, 128]),
            "layers": _choice(rng, [1, 2, 3]),
            "epochs": 300,
            "batch": _choice(rng, [32, 64, 128]),
            "learning_rate": round(_log_uniform(rng, 3e-4, 1e-2), 6),
        }
    return ModelSpec(family=family, task=task, hyperparameters=hp, seed=seed)


def sample_candidates(task: str, budget: SearchBudget) -> list[ModelSpec]:
    """The deterministic candidate list for a budget."""
    if budget.per_family is not None:
        families: list[str] = []
        for family in FAMILY_ORDER:
            families.extend([family] * budget.per_family.get(family, 0))
        families = families[: budget.max_candidates]
    else:
        families = [
            FAMILY_ORDER[i % len(FAMILY_ORDER)] for i in range(budget.max_candidates)
        ]
    if not families:
        raise ConfigError("budget admits no candidates")
    root = Rng(budget.seed)
    specs = []
    for i, family in enumerate(families):
        rng = root.spawn(i + 1)
        specs.append(_sample_spec(family, task, rng, seed=rng.next_u64()))
    return specs


# -- scoring ------------------------------------------------------------------------


def _gap(train_value: float, val_value: float, metric: str) -> float:
    """Generalization gap, positive when validation is worse than train."""
    if HIGHER_IS_BETTER[metric]:
        return train_value - val_value
    return val_value - train_value


def _overfit(metric: str, train_value: float, val_value: float, budget: SearchBudget) -> bool:
    gap = _gap(train_value, val_value, metric)
    if metric in ("rmse", "mae"):
        return gap / max(abs(train_value), 1e-12) > budget.overfit_gap_relative
    return gap > budget.overfit_gap_absolute


def overfit_flag(
    entry: LeaderboardEntry, primary_metric: str, budget: SearchBudget | None = None
) -> bool:
    """True when the entry's train/validation gap marks it as overfit.

    [0,1]-scale metrics (and r2) use an absolute gap threshold (default
    0.15); rmse/mae use a gap relative to the training value (default 25%).
    Flagged entries are excluded from best-model selection unless every
    entry is flagged.
    """
    budget = budget or SearchBudget()
    if entry.error is not None or entry.train_metrics is None:
        return False
    t = primary_score(entry.train_metrics, primary_metric)
    v = primary_score(entry.validation_metrics, primary_metric)
    if not (np.isfinite(t) and np.isfinite(v)):
        return False
    return _overfit(primary_metric, t, v, budget)


def _evaluate_candidate(
    spec: ModelSpec,
    train: Table,
    validation: Table,
    primary_metric: str,
    budget: SearchBudget,
):
    try:
        model = train_model(spec, train, validation)
    except DiscoverError as exc:
        return LeaderboardEntry(spec, None, None, None, error=str(exc)), None
    y_train = train.target_values()
    y_val = validation.target_values()
    m_train = compute_metrics(spec.task, y_train, model.predict(train))
    m_val = compute_metrics(spec.task, y_val, model.predict(validation))
    t, v = primary_score(m_train, primary_metric), primary_score(m_val, primary_metric)
    if np.isfinite(t) and np.isfinite(v):
        gap = _gap(t, v, primary_metric)
        flagged = _overfit(primary_metric, t, v, budget)
    else:
        gap, flagged = None, False
    entry = LeaderboardEntry(spec, m_val, m_train, gap, flagged=flagged)
    return entry, model


def search(
    train: Table,
    validation: Table,
    task: str,
    primary_metric: str,
    budget: SearchBudget,
    jobs: int = 1,
) -> tuple[Leaderboard, TrainedModel]:
    """Run the candidate search and return the leaderboard plus best model.

    Deterministic for a fixed budget.seed regardless of `jobs`: candidate
    seeds are counter-derived and assembly sorts by score then spec key.
    """
    if primary_metric not in metric_ids_for_task(task):
        raise ConfigError(f"metric {primary_metric!r} not legal for task {task!r}")
    if validation.n_rows == 0:
        raise ConfigError("validation table is empty")
    specs = sample_candidates(task, budget)

    deadline = time.monotonic() + budget.time_limit if budget.time_limit else None
    results: list[tuple[LeaderboardEntry, TrainedModel | None]] = []
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = []
            for spec in specs:
                if deadline is not None and time.monotonic() > deadline and futures:
                    break
                futures.append(
                    pool.submit(
                        _evaluate_candidate, spec, train, validation, primary_metric, budget
                    )
                )
            results = [f.result() for f in futures]
    else:
        for spec in specs:
            if deadline is not None and time.monotonic() > deadline and results:
                break
            results.append(
                _evaluate_candidate(spec, train, validation, primary_metric, budget)
            )

    entries = [entry for entry, _ in results]
    models = {id(entry): model for entry, model in results}
    ok = [e for e in entries if e.error is None]
    if not ok:
        raise PipelineError(
            "no candidate trained successfully: "
            + "; ".join(sorted({e.error for e in entries if e.error}))
        )

    sign = 1.0 if HIGHER_IS_BETTER[primary_metric] else -1.0

    def sort_key(entry: LeaderboardEntry):
        if entry.error is not None:
            return (1, 0.0, entry.spec.key())
        return (0, -sign * primary_score(entry.validation_metrics, primary_metric), entry.spec.key())

    entries.sort(key=sort_key)
    unflagged = [e for e in entries if e.error is None and not e.flagged]
    all_flagged = not unflagged
    pool_entries = unflagged if unflagged else [e for e in entries if e.error is None]
    best_entry = pool_entries[0]  # entries already sorted best-first
    best_index = next(i for i, e in enumerate(entries) if e is best_entry)
    board = Leaderboard(
        entries=entries,
        best_index=best_index,
        primary_metric=primary_metric,
        all_flagged=all_flagged,
    )
    return board, models[id(best_entry)]

"""End-to-end run: ingest, split, preprocess, search, mine, report.

The flow is fully seeded: the run seed spawns child streams for the
outer split, the tuning split, the model search, and the pattern search,
so identical config + seed reproduces the report byte-for-byte (except
the timestamp).  Pattern evidence is computed on the raw tables; models
see the preprocessed views.
"""
from __future__ import annotations

import datetime as _dt
import json
import os
import shutil
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .automl import Leaderboard, SearchBudget, search
from .errors import ConfigError, DataError, DiscoverError, PipelineError
from .metrics import compute_metrics, metric_ids_for_task
from .models import TrainedModel
from .patterns import MiningConfig, classify_pattern, mine_patterns
from .preprocess import apply_plan, fit_plan
from .report import RunReport, build_report, config_hash, render_markdown
from .rng import Rng
from .table import (
    BINARY,
    CATEGORICAL,
    NUMERIC,
    ColumnSchema,
    SplitSpec,
    Table,
    read_csv,
)

TUNING_FRACTION = 0.2  # slice of the training table used for candidate scoring


def _take_keys(raw: dict, allowed: dict, context: str) -> dict:
    unknown = set(raw) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown {context} keys: {sorted(unknown)}")
    merged = dict(allowed)
    merged.update(raw)
    return merged


@dataclass(frozen=True)
class RunConfig:
    data: str
    target: str
    task: str = "auto"
    positive_levels: tuple | None = None
    exclude_target_levels: tuple = ()
    ignored_columns: tuple = ()
    schema_hints: dict | None = None
    missing_tokens: tuple = ("", "NA", "NaN")
    holdout_fraction: float = 0.2
    stratified: bool = True
    dedup: bool = True
    z_threshold: float = 4.0
    budget: SearchBudget = SearchBudget()
    mining: MiningConfig = MiningConfig()
    primary_metric: str | None = None
    seed: int = 0
    output_dir: str = "runs"

    @staticmethod
    def from_dict(raw: dict) -> "RunConfig":
        top = _take_keys(
            raw,
            {
                "data": None,
                "target": None,
                "task": "auto",
                "positive_levels": None,
                "exclude_target_levels": [],
                "ignored_columns": [],
                "schema_hints": {},
                "missing_tokens": ["", "NA", "NaN"],
                "split": {},
                "preprocess": {},
                "budget": {},
                "mining": {},
                "primary_metric": None,
                "seed": 0,
                "output_dir": "runs",
            },
            "config",
        )
        if not top["data"] or not top["target"]:
            raise ConfigError("config requires 'data' and 'target'")
        if top["task"] not in ("auto", "regression", "binary_classification"):
            raise ConfigError(f"unknown task {top['task']!r}")
        split_cfg = _take_keys(
            top["split"] or {}, {"holdout_fraction": 0.2, "stratified": True}, "split"
        )
        prep_cfg = _take_keys(
            top["preprocess"] or {}, {"dedup": True, "z_threshold": 4.0}, "preprocess"
        )
        budget_raw = dict(top["budget"] or {})
        try:
            budget = SearchBudget(**budget_raw)
        except TypeError as exc:
            raise ConfigError(f"bad budget config: {exc}") from None
        mining_raw = dict(top["mining"] or {})
        try:
            mining = MiningConfig.from_dict(mining_raw)
        except TypeError as exc:
            raise ConfigError(f"bad mining config: {exc}") from None
        return RunConfig(
            data=top["data"],
            target=top["target"],
            task=top["task"],
            positive_levels=tuple(top["positive_levels"]) if top["positive_levels"] else None,
            exclude_target_levels=tuple(top["exclude_target_levels"] or ()),
            ignored_columns=tuple(top["ignored_columns"] or ()),
            schema_hints=dict(top["schema_hints"] or {}),
            missing_tokens=tuple(top["missing_tokens"]),
            holdout_fraction=float(split_cfg["holdout_fraction"]),
            stratified=bool(split_cfg["stratified"]),
            dedup=bool(prep_cfg["dedup"]),
            z_threshold=float(prep_cfg["z_threshold"]),
            budget=budget,
            mining=mining,
            primary_metric=top["primary_metric"],
            seed=int(top["seed"]),
            output_dir=top["output_dir"],
        )

    def to_dict(self) -> dict:
        """Fully resolved config; hashing this is reproducible."""
        return {
            "data": self.data,
            "target": self.target,
            "task": self.task,
            "positive_levels": list(self.positive_levels) if self.positive_levels else None,
            "exclude_target_levels": list(self.exclude_target_levels),
            "ignored_columns": list(self.ignored_columns),
            "schema_hints": dict(self.schema_hints or {}),
            "missing_tokens": list(self.missing_tokens),
            "split": {
                "holdout_fraction": self.holdout_fraction,
                "stratified": self.stratified,
            },
            "preprocess": {"dedup": self.dedup, "z_threshold": self.z_threshold},
            "budget": self.budget.to_dict(),
            "mining": self.mining.to_dict(),
            "primary_metric": self.primary_metric,
            "seed": self.seed,
            "output_dir": self.output_dir,
        }


def load_config(path: str | Path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return RunConfig.from_dict(raw)


def binarize_target(table: Table, positive_levels: tuple) -> Table:
    """Collapse a categorical target into binary negative/positive levels."""
    target = table.target_name
    if table.schema(target).kind == NUMERIC:
        raise ConfigError("positive_levels only applies to categorical targets")
    levels = table.levels(target)
    unknown = set(positive_levels) - set(levels)
    if unknown:
        raise ConfigError(f"positive_levels not in target levels: {sorted(unknown)}")
    pos_codes = {levels.index(lv) for lv in positive_levels}
    codes = table.column(target)
    miss = table.mask(target)
    new_codes = np.where(np.isin(codes, list(pos_codes)), 1, 0).astype(np.int32)
    new_codes[miss] = -1

    schemas, columns, masks, level_map = [], {}, {}, {}
    for s in table.schemas:
        if s.name == target:
            schemas.append(ColumnSchema(target, BINARY, s.role))
            columns[target] = new_codes
            masks[target] = miss
            level_map[target] = ("negative", "positive")
        else:
            schemas.append(s)
            columns[s.name] = table.column(s.name)
            masks[s.name] = table.mask(s.name)
            if s.kind in (CATEGORICAL, BINARY):
                level_map[s.name] = table.levels(s.name)
    return Table(schemas, columns, masks, level_map)


def resolve_task(table: Table, requested: str) -> str:
    kind = table.schema(table.target_name).kind
    if requested == "regression":
        if kind != NUMERIC:
            raise ConfigError("regression needs a numeric target")
        return requested
    if requested == "binary_classification":
        if kind == NUMERIC:
            raise ConfigError(
                "binary classification needs a binary/categorical target "
                "(use schema_hints or positive_levels)"
            )
        if len(table.levels(table.target_name)) != 2:
            raise ConfigError("classification target must have exactly two levels")
        return requested
    # auto
    if kind == NUMERIC:
        return "regression"
    if len(table.levels(table.target_name)) == 2:
        return "binary_classification"
    raise ConfigError(
        f"target has {len(table.levels(table.target_name))} levels; "
        "binarize it with positive_levels"
    )


@dataclass
class RunArtifacts:
    report: RunReport
    model: TrainedModel
    plan_dict: dict
    leaderboard: Leaderboard
    run_name: str


def ingest(config: RunConfig) -> Table:
    table = read_csv(
        config.data,
        schema_hints=config.schema_hints or None,
        missing_tokens=config.missing_tokens,
    )
    if config.target not in table.column_names:
        raise DataError(f"target column {config.target!r} not in {config.data}")
    table = table.with_roles(target=config.target, ignored=config.ignored_columns)
    if config.positive_levels:
        table = binarize_target(table, config.positive_levels)
    observed = ~table.mask(config.target)
    if not observed.any():
        raise DataError("target column is entirely missing")
    if not observed.all():
        table = table.take(np.flatnonzero(observed))
    return table.drop_columns(
        [s.name for s in table.schemas if s.role == "ignored"]
    )


def run_pipeline(config: RunConfig, jobs: int = 1, timestamp: str | None = None) -> RunArtifacts:
    table = ingest(config)
    task = resolve_task(table, config.task)
    primary_metric = config.primary_metric or (
        "accuracy" if task == "binary_classification" else "rmse"
    )
    if primary_metric not in metric_ids_for_task(task):
        raise ConfigError(f"metric {primary_metric!r} not legal for task {task!r}")

    seeds = Rng(config.seed)
    outer_seed = seeds.spawn(1).next_u64()
    tune_seed = seeds.spawn(2).next_u64()
    search_seed = seeds.spawn(3).next_u64()
    mine_seed = seeds.spawn(4).next_u64()

    from .table import split as split_table

    train_raw, holdout_raw = split_table(
        table, SplitSpec(config.holdout_fraction, config.stratified, seed=outer_seed)
    )
    plan = fit_plan(train_raw, dedup_enabled=config.dedup, z_threshold=config.z_threshold)
    train_proc = apply_plan(plan, train_raw, is_training=True)
    holdout_proc = apply_plan(plan, holdout_raw, is_training=False)
    if train_proc.n_rows < 5:
        raise DataError("too few training rows survive preprocessing")

    fit_proc, tune_proc = split_table(
        train_proc, SplitSpec(TUNING_FRACTION, config.stratified, seed=tune_seed)
    )
    budget = replace(config.budget, seed=search_seed)
    leaderboard, model = search(fit_proc, tune_proc, task, primary_metric, budget, jobs=jobs)

    holdout_metrics = compute_metrics(
        task, holdout_proc.target_values(), model.predict(holdout_proc)
    )

    mining = replace(config.mining, seed=mine_seed)
    records = mine_patterns(model, train_raw, holdout_raw, mining, plan=plan)
    for record in records:
        kind = classify_pattern(
            record.evidence_train, record.evidence_holdout, mining, record.model_agrees
        )
        record.pattern = replace(record.pattern, kind=kind)

    resolved = config.to_dict()
    report = build_report(
        config=resolved,
        plan_dict=plan.to_dict(),
        leaderboard=leaderboard,
        holdout_metrics=holdout_metrics,
        records=records,
        full_table=table,
        seed=config.seed,
        timestamp=timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(),
        version=__version__,
    )
    return RunArtifacts(
        report=report,
        model=model,
        plan_dict=plan.to_dict(),
        leaderboard=leaderboard,
        run_name=f"run-{config_hash(resolved)[:12]}",
    )


def write_artifacts(artifacts: RunArtifacts, out_root: str | Path) -> Path:
    """Write report.json/report.md/model.json/plan.json/leaderboard.json
    into a run directory named by config hash (temp dir + atomic rename,
    so failures leave no partial run directory)."""
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    final = out_root / artifacts.run_name
    tmp = out_root / f".tmp-{artifacts.run_name}-{os.getpid()}"
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir()
    try:
        (tmp / "report.json").write_text(artifacts.report.to_json(), encoding="utf-8")
        (tmp / "report.md").write_text(
            render_markdown(artifacts.report), encoding="utf-8"
        )
        from .report import jsonify

        (tmp / "model.json").write_text(
            json.dumps(jsonify(artifacts.model.to_dict()), sort_keys=True) + "\n",
            encoding="utf-8",
        )
        (tmp / "plan.json").write_text(
            json.dumps(jsonify(artifacts.plan_dict), sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
        (tmp / "leaderboard.json").write_text(
            json.dumps(jsonify(artifacts.leaderboard.to_dict()), sort_keys=True, indent=2)
            + "\n",
            encoding="utf-8",
        )
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    if final.exists():
        shutil.rmtree(final)
    os.replace(tmp, final)
    return final

"""Run reports: canonical JSON artifact plus a Markdown projection.

The JSON report is the source of truth: config (with recomputable hash),
preprocessing plan, leaderboard, best-model holdout metrics, ranked
discoveries and hypotheses with their evidence, and per-pattern figure
payloads (overall / each condition alone / full conjunction, each
annotated with n, mu, p).  The Markdown rendering is a pure projection of
the JSON and is byte-deterministic for a given report.  The timestamp is
isolated in one metadata field so everything else can be compared
byte-for-byte across runs.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .automl import Leaderboard
from .metrics import MetricSet
from .patterns import (
    DISCOVERY,
    HYPOTHESIS,
    MinedPattern,
    Pattern,
    PatternEvidence,
    evaluate_pattern,
    pattern_mask,
)
from .table import BINARY, CATEGORICAL, Table

BAR_PROPORTION = "bar_proportion"
VIOLIN = "violin"


def jsonify(value):
    """Recursively convert numpy scalars/arrays so json.dumps accepts them."""
    if isinstance(value, dict):
        return {k: jsonify(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonify(v) for v in value]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return [jsonify(v) for v in value.tolist()]
    return value


def config_hash(config: dict) -> str:
    canonical = json.dumps(jsonify(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class FigureGroup:
    label: str
    n: int
    mu: float | None
    p: float | None  # None for the overall group (nothing to compare against)
    values: list | None = None  # raw subgroup target values for violin figures

    def to_dict(self) -> dict:
        return {"label": self.label, "n": self.n, "mu": self.mu, "p": self.p, "values": self.values}

    @staticmethod
    def from_dict(d: dict) -> "FigureGroup":
        return FigureGroup(**d)


@dataclass
class FigurePayload:
    kind: str  # bar_proportion | violin
    pattern_rank: int
    groups: list

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "pattern_rank": self.pattern_rank,
            "groups": [g.to_dict() for g in self.groups],
        }

    @staticmethod
    def from_dict(d: dict) -> "FigurePayload":
        return FigurePayload(
            kind=d["kind"],
            pattern_rank=d["pattern_rank"],
            groups=[FigureGroup.from_dict(g) for g in d["groups"]],
        )


@dataclass
class RunReport:
    metadata: dict  # config_hash, seed, timestamp, version, threshold
    config: dict
    preprocess_plan: dict
    leaderboard: Leaderboard
    holdout_metrics: MetricSet
    discoveries: list  # MinedPattern records, ranked
    hypotheses: list
    figure_data: list

    def to_dict(self) -> dict:
        def record_dict(rec: MinedPattern) -> dict:
            return {
                "pattern": rec.pattern.to_dict(),
                "evidence_train": rec.evidence_train.to_dict(),
                "evidence_holdout": rec.evidence_holdout.to_dict(),
                "model_agrees": rec.model_agrees,
            }

        return jsonify(
            {
                "metadata": self.metadata,
                "config": self.config,
                "preprocess_plan": self.preprocess_plan,
                "leaderboard": self.leaderboard.to_dict(),
                "holdout_metrics": self.holdout_metrics.to_dict(),
                "discoveries": [record_dict(r) for r in self.discoveries],
                "hypotheses": [record_dict(r) for r in self.hypotheses],
                "figure_data": [f.to_dict() for f in self.figure_data],
            }
        )

    @staticmethod
    def from_dict(d: dict) -> "RunReport":
        def record(rd: dict) -> MinedPattern:
            return MinedPattern(
                pattern=Pattern.from_dict(rd["pattern"]),
                evidence_train=PatternEvidence.from_dict(rd["evidence_train"]),
                evidence_holdout=PatternEvidence.from_dict(rd["evidence_holdout"]),
                model_agrees=rd["model_agrees"],
            )

        return RunReport(
            metadata=d["metadata"],
            config=d["config"],
            preprocess_plan=d["preprocess_plan"],
            leaderboard=Leaderboard.from_dict(d["leaderboard"]),
            holdout_metrics=MetricSet.from_dict(d["holdout_metrics"]),
            discoveries=[record(r) for r in d["discoveries"]],
            hypotheses=[record(r) for r in d["hypotheses"]],
            figure_data=[FigurePayload.from_dict(f) for f in d["figure_data"]],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _figure_payload(full_table: Table, record: MinedPattern, rank: int) -> FigurePayload:
    """Per-pattern plot payload on the full raw dataset: the overall group,
    each condition alone, and the conjunction."""
    target = full_table.target_name
    binary = full_table.schema(target).kind in (BINARY, CATEGORICAL)
    observed = ~full_table.mask(target)
    y = full_table.target_values() if binary else full_table.column(target)

    def group(label: str, pattern: Pattern | None) -> FigureGroup:
        if pattern is None:
            mask = observed
            p = None
        else:
            mask = pattern_mask(full_table, pattern) & observed
            p = evaluate_pattern(full_table, pattern).p
        n = int(mask.sum())
        mu = float(y[mask].mean()) if n else None
        values = None if binary else [float(v) for v in y[mask]]
        return FigureGroup(label=label, n=n, mu=mu, p=p, values=values)

    effect = record.pattern.effect
    groups = [group("all rows", None)]
    for condition in record.pattern.conditions:
        groups.append(
            group(condition.describe(), Pattern(conditions=(condition,), effect=effect))
        )
    if len(record.pattern.conditions) > 1:
        groups.append(group("all conditions", record.pattern))
    return FigurePayload(
        kind=BAR_PROPORTION if binary else VIOLIN, pattern_rank=rank, groups=groups
    )


def build_report(
    config: dict,
    plan_dict: dict,
    leaderboard: Leaderboard,
    holdout_metrics: MetricSet,
    records: list,
    full_table: Table,
    seed: int,
    timestamp: str,
    version: str,
) -> RunReport:
    """Assemble the report; only classified patterns are included and
    figure payloads are recomputed from the full raw dataset."""
    discoveries = [r for r in records if r.pattern.kind == DISCOVERY]
    hypotheses = [r for r in records if r.pattern.kind == HYPOTHESIS]
    figures = []
    for rec in discoveries + hypotheses:
        rank = rec.evidence_holdout.novelty_rank or 0
        figures.append(_figure_payload(full_table, rec, rank))
    metadata = {
        "config_hash": config_hash(config),
        "seed": seed,
        "timestamp": timestamp,
        "version": version,
        "classification_threshold": 0.5,
    }
    return RunReport(
        metadata=metadata,
        config=jsonify(config),
        preprocess_plan=jsonify(plan_dict),
        leaderboard=leaderboard,
        holdout_metrics=holdout_metrics,
        discoveries=discoveries,
        hypotheses=hypotheses,
        figure_data=figures,
    )


# -- markdown -------------------------------------------------------------------


def _fmt(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def _evidence_line(label: str, ev: PatternEvidence) -> str:
    line = f"- {label}: n = {ev.n}, mu = {_fmt(ev.mu)}, p = {_fmt(ev.p)}"
    if ev.p_adjusted is not None:
        line += f" (BH-adjusted {_fmt(ev.p_adjusted)})"
    if ev.degenerate:
        line += " [degenerate]"
    return line


def _pattern_section(rec: MinedPattern, index: int) -> list:
    pattern = rec.pattern
    lines = [f"### {index}. {pattern.describe()}", ""]
    lines.append(f"- effect: {pattern.effect}; novelty rank {rec.evidence_holdout.novelty_rank}")
    for k, condition in enumerate(pattern.conditions, start=1):
        lines.append(f"- condition {k}: {condition.describe()}")
    lines.append(_evidence_line("training evidence", rec.evidence_train))
    lines.append(_evidence_line("holdout evidence", rec.evidence_holdout))
    lines.append(
        f"- holdout effect size: {_fmt(rec.evidence_holdout.effect_size)}; "
        f"model agrees: {'yes' if rec.model_agrees else 'no'}"
    )
    lines.append("")
    return lines


def render_markdown(report: RunReport) -> str:
    """Deterministic human-readable projection of the JSON report."""
    md = report.metadata
    lines = [
        "# Discovery run report",
        "",
        f"- config hash: `{md['config_hash']}`",
        f"- seed: {md['seed']}",
        f"- generated: {md['timestamp']}",
        "",
        "## Best model",
        "",
    ]
    best = report.leaderboard.best_entry
    lines.append(f"- family: {best.spec.family}")
    lines.append(f"- selection metric: {report.leaderboard.primary_metric}")
    if report.leaderboard.all_flagged:
        lines.append("- warning: every candidate was overfit-flagged; best flagged entry kept")
    lines.append("")
    lines.append("### Holdout metrics")
    lines.append("")
    lines.append("| metric | value |")
    lines.append("|---|---|")
    for metric_id, value in sorted(report.holdout_metrics.values.items()):
        lines.append(f"| {metric_id} | {_fmt(value)} |")
    lines.append("")

    lines.append("## Leaderboard")
    lines.append("")
    lines.append("| rank | family | validation | train | gap | flagged | error |")
    lines.append("|---|---|---|---|---|---|---|")
    metric = report.leaderboard.primary_metric
    for i, entry in enumerate(report.leaderboard.entries, start=1):
        val = entry.validation_metrics.values.get(metric) if entry.validation_metrics else None
        tr = entry.train_metrics.values.get(metric) if entry.train_metrics else None
        lines.append(
            f"| {i} | {entry.spec.family} | {_fmt(val)} | {_fmt(tr)} | "
            f"{_fmt(entry.overfit_gap)} | {'yes' if entry.flagged else 'no'} | "
            f"{entry.error or '-'} |"
        )
    lines.append("")

    for title, records in (("Discoveries", report.discoveries), ("Hypotheses", report.hypotheses)):
        lines.append(f"## {title}")
        lines.append("")
        if not records:
            lines.append(f"No {title.lower()} in this run.")
            lines.append("")
            continue
        for i, rec in enumerate(records, start=1):
            lines.extend(_pattern_section(rec, i))
    return "\n".join(lines) + "\n"

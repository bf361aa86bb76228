"""Subgroup pattern mining: conditions, evidence, beam search, classification.

A pattern is a conjunction of per-feature conditions plus a claimed effect
on the target (mean shift, class-odds shift, or variance shift).  Each
pattern carries an evidence triplet (n, mu, p): subgroup size, subgroup
target mean (positive fraction for binary targets), and the p-value of a
one-tailed test of the subgroup against its complement.

Mining is an importance-guided beam search over a quantile-grid condition
vocabulary.  Candidate quality on the training split is -log10(p); the
emitted pool is re-tested on the holdout split, Benjamini-Hochberg
adjusted, and ranked by holdout p-value.  Patterns are then classified as
discoveries (validated on holdout) or hypotheses (training support plus
model agreement only).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DataError, SchemaError
from .models import TrainedModel, permutation_importance
from .preprocess import PreprocessPlan, apply_plan
from .rng import Rng
from .stats import (
    GREATER,
    LESS,
    TestResult,
    benjamini_hochberg,
    mann_whitney_one_tailed,
    proportions_z_one_tailed,
)
from .table import BINARY, CATEGORICAL, NUMERIC, SplitSpec, Table, split

QUANTILE_ABOVE = "quantile_above"
QUANTILE_BELOW = "quantile_below"
INTERVAL = "interval"
CATEGORY_EQUALS = "category_equals"

MEAN_INCREASE = "mean_increase"
MEAN_DECREASE = "mean_decrease"
ODDS_INCREASE = "odds_increase"
ODDS_DECREASE = "odds_decrease"
VARIANCE_INCREASE = "variance_increase"
VARIANCE_DECREASE = "variance_decrease"

EFFECTS = (
    MEAN_INCREASE,
    MEAN_DECREASE,
    ODDS_INCREASE,
    ODDS_DECREASE,
    VARIANCE_INCREASE,
    VARIANCE_DECREASE,
)

DISCOVERY = "discovery"
HYPOTHESIS = "hypothesis"
DROPPED = "dropped"

_EFFECT_DIRECTION = {
    MEAN_INCREASE: GREATER,
    MEAN_DECREASE: LESS,
    ODDS_INCREASE: GREATER,
    ODDS_DECREASE: LESS,
    VARIANCE_INCREASE: GREATER,
    VARIANCE_DECREASE: LESS,
}


@dataclass(frozen=True)
class Condition:
    """One constraint on one feature.

    Quantile forms are bound to data before use: `bound` holds the
    realized raw threshold (linear-interpolated empirical quantile).
    Intervals are closed on both ends; missing values never match.
    """

    feature: str
    form: str
    q: float | None = None
    lo: float | None = None
    hi: float | None = None
    level: str | None = None
    bound: float | None = None

    def __post_init__(self):
        if self.form in (QUANTILE_ABOVE, QUANTILE_BELOW):
            if self.q is None or not 0.0 < self.q < 1.0:
                raise ConfigError(f"quantile condition needs q in (0,1), got {self.q}")
        elif self.form == INTERVAL:
            if self.lo is None or self.hi is None or not self.lo < self.hi:
                raise ConfigError(f"interval needs lo < hi, got [{self.lo}, {self.hi}]")
        elif self.form == CATEGORY_EQUALS:
            if self.level is None:
                raise ConfigError("category_equals needs a level")
        else:
            raise ConfigError(f"unknown condition form {self.form!r}")

    def key(self) -> str:
        if self.form == CATEGORY_EQUALS:
            return f"{self.feature}|{self.form}|{self.level}"
        if self.form == INTERVAL:
            return f"{self.feature}|{self.form}|{self.lo!r}|{self.hi!r}"
        return f"{self.feature}|{self.form}|{self.q!r}|{self.bound!r}"

    def describe(self) -> str:
        if self.form == QUANTILE_ABOVE:
            pct = round(100 * (1.0 - self.q))
            ref = f" (> {self.bound:g})" if self.bound is not None else ""
            return f"{self.feature} in the top {pct}%{ref}"
        if self.form == QUANTILE_BELOW:
            pct = round(100 * self.q)
            ref = f" (< {self.bound:g})" if self.bound is not None else ""
            return f"{self.feature} in the bottom {pct}%{ref}"
        if self.form == INTERVAL:
            return f"{self.feature} between {self.lo:g} and {self.hi:g}"
        return f"{self.feature} is {self.level}"

    def to_dict(self) -> dict:
        out = {"feature": self.feature, "form": self.form}
        for name in ("q", "lo", "hi", "level", "bound"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out

    @staticmethod
    def from_dict(d: dict) -> "Condition":
        return Condition(**d)


@dataclass(frozen=True)
class Pattern:
    conditions: tuple
    effect: str
    kind: str | None = None

    def __post_init__(self):
        if not self.conditions:
            raise ConfigError("a pattern needs at least one condition")
        features = [c.feature for c in self.conditions]
        if len(set(features)) != len(features):
            raise ConfigError("pattern conditions must reference distinct features")
        if self.effect not in EFFECTS:
            raise ConfigError(f"unknown effect {self.effect!r}")

    def key(self) -> str:
        return self.effect + "&" + "&".join(sorted(c.key() for c in self.conditions))

    def describe(self) -> str:
        return " AND ".join(c.describe() for c in self.conditions)

    def to_dict(self) -> dict:
        return {
            "conditions": [c.to_dict() for c in self.conditions],
            "effect": self.effect,
            "kind": self.kind,
        }

    @staticmethod
    def from_dict(d: dict) -> "Pattern":
        return Pattern(
            conditions=tuple(Condition.from_dict(c) for c in d["conditions"]),
            effect=d["effect"],
            kind=d.get("kind"),
        )


@dataclass
class PatternEvidence:
    n: int
    mu: float | None
    p: float
    test: TestResult | None
    effect_size: float | None
    degenerate: bool = False
    p_adjusted: float | None = None
    novelty_rank: int | None = None

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "mu": self.mu,
            "p": self.p,
            "test": self.test.to_dict() if self.test else None,
            "effect_size": self.effect_size,
            "degenerate": self.degenerate,
            "p_adjusted": self.p_adjusted,
            "novelty_rank": self.novelty_rank,
        }

    @staticmethod
    def from_dict(d: dict) -> "PatternEvidence":
        return PatternEvidence(
            n=d["n"],
            mu=d["mu"],
            p=d["p"],
            test=TestResult.from_dict(d["test"]) if d["test"] else None,
            effect_size=d["effect_size"],
            degenerate=d["degenerate"],
            p_adjusted=d.get("p_adjusted"),
            novelty_rank=d.get("novelty_rank"),
        )


@dataclass(frozen=True)
class MiningConfig:
    beam_width: int = 20
    max_arity: int = 3
    n_min: int = 10
    alpha_discovery: float = 0.01
    alpha_hypothesis: float = 0.05
    top_k_features: int = 12
    quantile_grid: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    max_interval_bins: int = 3
    max_patterns: int = 50
    include_variance: bool = False
    importance_metric: str | None = None  # None -> accuracy / rmse by task
    importance_repeats: int = 3
    importance_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.beam_width < 1 or self.max_arity < 1 or self.n_min < 1:
            raise ConfigError("beam_width, max_arity and n_min must be >= 1")
        if self.top_k_features < 1:
            raise ConfigError("top_k_features must be >= 1")
        if not all(0.0 < q < 1.0 for q in self.quantile_grid):
            raise ConfigError("quantile_grid entries must lie in (0,1)")
        if sorted(self.quantile_grid) != list(self.quantile_grid):
            raise ConfigError("quantile_grid must be sorted ascending")

    def to_dict(self) -> dict:
        return {
            "beam_width": self.beam_width,
            "max_arity": self.max_arity,
            "n_min": self.n_min,
            "alpha_discovery": self.alpha_discovery,
            "alpha_hypothesis": self.alpha_hypothesis,
            "top_k_features": self.top_k_features,
            "quantile_grid": list(self.quantile_grid),
            "max_interval_bins": self.max_interval_bins,
            "max_patterns": self.max_patterns,
            "include_variance": self.include_variance,
            "importance_metric": self.importance_metric,
            "importance_repeats": self.importance_repeats,
            "importance_fraction": self.importance_fraction,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "MiningConfig":
        d = dict(d)
        if "quantile_grid" in d:
            d["quantile_grid"] = tuple(d["quantile_grid"])
        return MiningConfig(**d)


@dataclass
class MinedPattern:
    pattern: Pattern
    evidence_train: PatternEvidence
    evidence_holdout: PatternEvidence
    model_agrees: bool = True


# -- condition binding ----------------------------------------------------------


def empirical_quantile(values: np.ndarray, q: float) -> float:
    """Linear-interpolated empirical quantile of the non-missing values."""
    return float(np.quantile(values, q, method="linear"))


def realize_condition(table: Table, condition: Condition) -> Condition:
    """Bind a quantile condition's threshold to this table's data."""
    if condition.form not in (QUANTILE_ABOVE, QUANTILE_BELOW) or condition.bound is not None:
        return condition
    schema = table.schema(condition.feature)
    if schema.kind != NUMERIC:
        raise SchemaError(f"{condition.form} needs a numeric column, {condition.feature!r} is {schema.kind}")
    values = table.column(condition.feature)[~table.mask(condition.feature)]
    if len(values) == 0:
        raise DataError(f"column {condition.feature!r} has no observed values to bind against")
    return replace(condition, bound=empirical_quantile(values, condition.q))


def bind_conditions(table: Table, condition: Condition) -> np.ndarray:
    """Row mask of the condition on `table`; missing values never match.

    Unbound quantile conditions are bound against this table's empirical
    quantiles first.  quantile_above selects raw value > bound,
    quantile_below selects raw value < bound, intervals are closed.
    """
    schema = table.schema(condition.feature)
    observed = ~table.mask(condition.feature)
    column = table.column(condition.feature)
    if condition.form == CATEGORY_EQUALS:
        if schema.kind == NUMERIC:
            raise SchemaError(f"category condition on numeric column {condition.feature!r}")
        levels = table.levels(condition.feature)
        if condition.level not in levels:
            raise SchemaError(f"unknown level {condition.level!r} for column {condition.feature!r}")
        return observed & (column == levels.index(condition.level))

    if schema.kind != NUMERIC:
        raise SchemaError(f"numeric condition on {schema.kind} column {condition.feature!r}")
    if condition.form == INTERVAL:
        return observed & (column >= condition.lo) & (column <= condition.hi)
    bound = realize_condition(table, condition).bound
    if condition.form == QUANTILE_ABOVE:
        return observed & (column > bound)
    return observed & (column < bound)


def pattern_mask(table: Table, pattern: Pattern) -> np.ndarray:
    mask = np.ones(table.n_rows, dtype=bool)
    for condition in pattern.conditions:
        mask &= bind_conditions(table, condition)
    return mask


# -- evidence ---------------------------------------------------------------------


def _degenerate_evidence(n: int, mu: float | None) -> PatternEvidence:
    return PatternEvidence(n=n, mu=mu, p=1.0, test=None, effect_size=None, degenerate=True)


def evaluate_pattern(table: Table, pattern: Pattern) -> PatternEvidence:
    """Evidence triplet for a pattern on raw (pre-scaled) data.

    Rows with a missing target are excluded from both the subgroup and the
    complement.  An empty subgroup or empty complement yields degenerate
    evidence with p = 1 (flagged, never an exception) so searches can
    prune.
    """
    target = table.target_name
    if target is None:
        raise SchemaError("table has no target column")
    mask = pattern_mask(table, pattern)

    target_observed = ~table.mask(target)
    mask = mask & target_observed
    comp = ~mask & target_observed
    binary_effect = pattern.effect in (ODDS_INCREASE, ODDS_DECREASE)
    if binary_effect:
        if table.schema(target).kind == NUMERIC:
            raise SchemaError("odds effects need a binary (or two-level) target")
        y = table.target_values()
    else:
        if table.schema(target).kind != NUMERIC:
            raise SchemaError(f"{pattern.effect} needs a numeric target")
        y = table.column(target)

    n = int(mask.sum())
    if n == 0:
        return _degenerate_evidence(0, None)
    mu = float(y[mask].mean())
    n_comp = int(comp.sum())
    if n_comp == 0:
        return _degenerate_evidence(n, mu)

    direction = _EFFECT_DIRECTION[pattern.effect]
    if binary_effect:
        s_sub = int(round(y[mask].sum()))
        s_comp = int(round(y[comp].sum()))
        test = proportions_z_one_tailed(s_sub, n, s_comp, n_comp, direction)
        effect_size = mu - s_comp / n_comp
    elif pattern.effect in (VARIANCE_INCREASE, VARIANCE_DECREASE):
        center = float(np.median(y[comp]))
        spread = np.abs(y - center)
        test = mann_whitney_one_tailed(spread[mask], spread[comp], direction)
        effect_size = float(y[mask].var() - y[comp].var())
    else:
        test = mann_whitney_one_tailed(y[mask], y[comp], direction)
        effect_size = mu - float(y[comp].mean())
    return PatternEvidence(n=n, mu=mu, p=test.p_value, test=test, effect_size=effect_size)


def classify_pattern(
    evidence_train: PatternEvidence,
    evidence_holdout: PatternEvidence,
    config: MiningConfig,
    model_agrees: bool = True,
) -> str:
    """Discovery / hypothesis / dropped per the validation thresholds.

    A discovery needs holdout support: n >= n_min and BH-adjusted holdout
    p <= alpha_discovery.  Otherwise a hypothesis needs training support
    (raw train p <= alpha_hypothesis) plus a model whose predicted
    subgroup effect agrees in direction.
    """
    adjusted = evidence_holdout.p_adjusted
    if adjusted is None:
        adjusted = evidence_holdout.p
    if (
        not evidence_holdout.degenerate
        and evidence_holdout.n >= config.n_min
        and adjusted <= config.alpha_discovery
    ):
        return DISCOVERY
    if (
        not evidence_train.degenerate
        and evidence_train.p <= config.alpha_hypothesis
        and model_agrees
    ):
        return HYPOTHESIS
    return DROPPED


# -- mining ------------------------------------------------------------------------


class _EvidenceEngine:
    """Cached per-table state so beam search can test thousands of masks.

    The reference sample is always the subgroup's complement within the
    same table, so pooled ranks and the tie correction are mask-invariant
    for mean-shift tests and can be precomputed once.
    """

    def __init__(self, table: Table, binary_target: bool):
        target = table.target_name
        self.observed = ~table.mask(target)
        self.binary = binary_target
        if binary_target:
            self.y = table.target_values()
        else:
            self.y = table.column(target)
        self.n_observed = int(self.observed.sum())
        if not binary_target:
            from .stats import _midranks

            obs_y = self.y[self.observed]
            self.ranks = np.zeros(table.n_rows)
            self.ranks[self.observed], self.tie_sum, _ = _midranks(obs_y)

    def evidence(self, mask: np.ndarray, effect: str) -> PatternEvidence:
        mask = mask & self.observed
        n = int(mask.sum())
        if n == 0:
            return _degenerate_evidence(0, None)
        mu = float(self.y[mask].mean())
        n_comp = self.n_observed - n
        if n_comp == 0:
            return _degenerate_evidence(n, mu)
        direction = _EFFECT_DIRECTION[effect]

        if self.binary:
            s_sub = int(round(self.y[mask].sum()))
            s_all = int(round(self.y[self.observed].sum()))
            test = proportions_z_one_tailed(s_sub, n, s_all - s_sub, n_comp, direction)
            effect_size = mu - (s_all - s_sub) / n_comp
        elif effect in (VARIANCE_INCREASE, VARIANCE_DECREASE):
            comp = self.observed & ~mask
            center = float(np.median(self.y[comp]))
            spread = np.abs(self.y - center)
            test = mann_whitney_one_tailed(spread[mask], spread[comp], direction)
            effect_size = float(self.y[mask].var() - self.y[comp].var())
        else:
            test = self._mean_shift_test(mask, n, n_comp, direction)
            comp_mean = (self.y[self.observed].sum() - self.y[mask].sum()) / n_comp
            effect_size = mu - float(comp_mean)
        return PatternEvidence(n=n, mu=mu, p=test.p_value, test=test, effect_size=effect_size)

    def _mean_shift_test(self, mask, n1, n2, direction) -> TestResult:
        total = n1 + n2
        if total <= 12:
            comp = self.observed & ~mask
            return mann_whitney_one_tailed(self.y[mask], self.y[comp], direction)
        from .stats import _tail_p

        u1 = float(self.ranks[mask].sum() - n1 * (n1 + 1) / 2.0)
        mean_u = n1 * n2 / 2.0
        var_u = n1 * n2 / 12.0 * ((total + 1) - self.tie_sum / (total * (total - 1)))
        if var_u <= 0.0:
            return TestResult("mann_whitney", direction, u1, 1.0, n1, n2, "normal_approx")
        sd = np.sqrt(var_u)
        z = (u1 - mean_u - 0.5) / sd if direction == GREATER else (u1 - mean_u + 0.5) / sd
        return TestResult(
            "mann_whitney", direction, u1, _tail_p(float(z), direction), n1, n2, "normal_approx"
        )

    def preferred_effect(self, mask: np.ndarray, variance: bool = False) -> str:
        """Effect direction implied by the observed training shift."""
        mask = mask & self.observed
        comp = self.observed & ~mask
        if variance:
            up = float(self.y[mask].var()) >= float(self.y[comp].var())
            return VARIANCE_INCREASE if up else VARIANCE_DECREASE
        up = float(self.y[mask].mean()) >= float(self.y[comp].mean())
        if self.binary:
            return ODDS_INCREASE if up else ODDS_DECREASE
        return MEAN_INCREASE if up else MEAN_DECREASE


def _candidate_conditions(table: Table, feature: str, config: MiningConfig) -> list[Condition]:
    """Depth-1 condition vocabulary for one feature, bound to `table`."""
    schema = table.schema(feature)
    out: list[Condition] = []
    if schema.kind in (CATEGORICAL, BINARY):
        for level in table.levels(feature):
            out.append(Condition(feature, CATEGORY_EQUALS, level=level))
        return out

    values = table.column(feature)[~table.mask(feature)]
    if len(values) == 0:
        return []
    cuts = [empirical_quantile(values, q) for q in config.quantile_grid]
    seen = set()
    for q, cut in zip(config.quantile_grid, cuts):
        for form in (QUANTILE_ABOVE, QUANTILE_BELOW):
            key = (form, cut)
            if key not in seen:
                seen.add(key)
                out.append(Condition(feature, form, q=q, bound=cut))
    for i in range(len(cuts)):
        for j in range(i + 1, min(i + config.max_interval_bins, len(cuts) - 1) + 1):
            lo, hi = cuts[i], cuts[j]
            if lo < hi and (INTERVAL, lo, hi) not in seen:
                seen.add((INTERVAL, lo, hi))
                out.append(Condition(feature, INTERVAL, lo=lo, hi=hi))
    return out


def _rank_features(
    model: TrainedModel,
    train: Table,
    plan: PreprocessPlan,
    config: MiningConfig,
) -> list[str]:
    """Top features by permutation importance on a slice carved from train.

    The final holdout never feeds the search; importance is measured on a
    deterministic subset of the training rows processed as evaluation data.
    """
    metric = config.importance_metric
    if metric is None:
        metric = "accuracy" if model.spec.task == "binary_classification" else "rmse"
    seed = Rng(config.seed).spawn(101).next_u64()
    try:
        _, imp_slice = split(
            train, SplitSpec(config.importance_fraction, stratified=True, seed=seed)
        )
    except DataError:
        imp_slice = train
    processed = apply_plan(plan, imp_slice, is_training=False)
    scores = permutation_importance(
        model,
        processed,
        metric=metric,
        repeats=config.importance_repeats,
        seed=Rng(config.seed).spawn(102).next_u64(),
        groups=plan.output_groups(),
    )
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    if not ranked:
        raise DataError("no features survive importance ranking")
    return [name for name, _ in ranked[: config.top_k_features]]


def _model_agreement(
    predictions: np.ndarray, mask: np.ndarray, effect: str
) -> bool:
    """Does the model's predicted effect inside the region match the claim?"""
    if mask.all() or not mask.any():
        return False
    inside, outside = predictions[mask], predictions[~mask]
    if effect in (VARIANCE_INCREASE, VARIANCE_DECREASE):
        delta = float(inside.var() - outside.var())
        return delta > 0 if effect == VARIANCE_INCREASE else delta < 0
    delta = float(inside.mean() - outside.mean())
    if effect in (MEAN_INCREASE, ODDS_INCREASE):
        return delta > 0
    return delta < 0


def mine_patterns(
    model: TrainedModel,
    train: Table,
    holdout: Table,
    config: MiningConfig,
    plan: PreprocessPlan | None = None,
) -> list[MinedPattern]:
    """Beam search for validated patterns; returns records ranked by
    holdout p (ties: larger |effect|, then condition key), with BH-adjusted
    holdout p-values and model-agreement flags attached.
    """
    target = train.target_name
    if target is None:
        raise SchemaError("training table has no target column")
    binary_target = train.schema(target).kind in (BINARY, CATEGORICAL)
    if binary_target and len(train.levels(target)) != 2:
        raise SchemaError("categorical targets need exactly two levels for mining")

    if plan is not None:
        features = _rank_features(model, train, plan, config)
    else:
        features = [
            s.name for s in train.schemas if s.role == "feature"
        ][: config.top_k_features]

    engine_train = _EvidenceEngine(train, binary_target)
    engine_holdout = _EvidenceEngine(holdout, binary_target)

    conditions_by_feature: dict[str, list[tuple[Condition, np.ndarray]]] = {}
    for feature in features:
        pairs = []
        for condition in _candidate_conditions(train, feature, config):
            mask = bind_conditions(train, condition)
            n = int((mask & engine_train.observed).sum())
            if n >= config.n_min and n < engine_train.n_observed:
                pairs.append((condition, mask))
        if pairs:
            conditions_by_feature[feature] = pairs

    # beam entries: (score, key, conditions, mask, evidence, effect)
    @dataclass
    class _Entry:
        score: float
        key: str
        conditions: tuple
        mask: np.ndarray
        evidence: PatternEvidence
        effect: str

    def make_entry(conditions: tuple, mask: np.ndarray) -> _Entry | None:
        n = int((mask & engine_train.observed).sum())
        if n < config.n_min or n >= engine_train.n_observed:
            return None
        effect = engine_train.preferred_effect(mask)
        evidence = engine_train.evidence(mask, effect)
        if evidence.degenerate:
            return None
        entries = [(effect, evidence)]
        if config.include_variance and not binary_target:
            var_effect = engine_train.preferred_effect(mask, variance=True)
            entries.append((var_effect, engine_train.evidence(mask, var_effect)))
            entries.sort(key=lambda pair: pair[1].p)
        effect, evidence = entries[0]
        score = -np.log10(max(evidence.p, 1e-300))
        key = effect + "&" + "&".join(sorted(c.key() for c in conditions))
        return _Entry(float(score), key, conditions, mask, evidence, effect)

    emitted: dict[str, _Entry] = {}
    beam: list[_Entry] = []
    level_candidates: list[_Entry] = []
    for feature in features:
        for condition, mask in conditions_by_feature.get(feature, []):
            entry = make_entry((condition,), mask)
            if entry is not None:
                level_candidates.append(entry)

    for depth in range(config.max_arity):
        if depth > 0:
            level_candidates = []
            seen_keys: set[str] = set()
            for parent in beam:
                used = {c.feature for c in parent.conditions}
                for feature in features:
                    if feature in used:
                        continue
                    for condition, cmask in conditions_by_feature.get(feature, []):
                        conditions = tuple(
                            sorted(parent.conditions + (condition,), key=lambda c: c.key())
                        )
                        probe_key = "&".join(c.key() for c in conditions)
                        if probe_key in seen_keys:
                            continue
                        seen_keys.add(probe_key)
                        entry = make_entry(conditions, parent.mask & cmask)
                        if entry is not None:
                            level_candidates.append(entry)
        level_candidates.sort(key=lambda e: (-e.score, e.key))
        beam = level_candidates[: config.beam_width]
        for entry in beam:
            emitted.setdefault(entry.key, entry)
        if not beam:
            break

    pool = sorted(emitted.values(), key=lambda e: (-e.score, e.key))[: config.max_patterns]
    if not pool:
        return []

    # Model agreement measured on the processed training view (row-aligned
    # with the raw training table: evaluation-mode apply drops no rows).
    if plan is not None:
        predictions = model.predict(apply_plan(plan, train, is_training=False))
    else:
        predictions = None

    records: list[MinedPattern] = []
    for entry in pool:
        pattern = Pattern(conditions=entry.conditions, effect=entry.effect)
        holdout_mask = pattern_mask(holdout, pattern)
        ev_holdout = engine_holdout.evidence(holdout_mask, entry.effect)
        agrees = (
            _model_agreement(predictions, entry.mask, entry.effect)
            if predictions is not None
            else True
        )
        records.append(MinedPattern(pattern, entry.evidence, ev_holdout, agrees))

    adjusted = benjamini_hochberg([r.evidence_holdout.p for r in records])
    for record, q in zip(records, adjusted):
        record.evidence_holdout.p_adjusted = float(q)

    records.sort(
        key=lambda r: (
            r.evidence_holdout.p,
            -(abs(r.evidence_holdout.effect_size) if r.evidence_holdout.effect_size else 0.0),
            r.pattern.key(),
        )
    )
    for rank, record in enumerate(records, start=1):
        record.evidence_train.novelty_rank = rank
        record.evidence_holdout.novelty_rank = rank
    return records

"""Automated cleaning: impute, deduplicate, remove outliers, scale, encode.

A PreprocessPlan is fitted on training rows only and then applied to any
table.  Fit order matters for the scaling guarantees:

1. numeric imputation values = training medians (non-missing cells);
   categorical imputation values = training modal codes;
2. exact duplicate feature rows are identified on the imputed features
   (keep-first) when deduplication is enabled;
3. scaling statistics (mean, population std) and robust outlier
   statistics (median, 1.4826 * MAD) are computed over the surviving
   deduplicated rows, before any outlier removal.

Applying the plan z-scores numeric features, one-hot encodes categorical
features (training levels plus one reserved unseen slot), and -- on
training tables only -- drops duplicate rows and rows with any feature
beyond the robust-z threshold.  The target column is passed through
untouched.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, SchemaError
from .table import (
    BINARY,
    CATEGORICAL,
    NUMERIC,
    ROLE_TARGET,
    ColumnSchema,
    Table,
)

UNSEEN = "__unseen__"

ROBUST_Z_THRESHOLD = 4.0
MAD_SCALE = 1.4826  # makes MAD consistent with std under normality


@dataclass(frozen=True)
class NumericColumnPlan:
    impute_value: float
    mean: float
    std: float
    median: float
    mad_scale: float  # 1.4826 * MAD; 0 disables the outlier rule for the column


@dataclass(frozen=True)
class CategoricalColumnPlan:
    impute_level: str
    levels: tuple[str, ...]  # training levels; one-hot adds the unseen slot


@dataclass(frozen=True)
class PreprocessPlan:
    feature_order: tuple[str, ...]  # surviving features, original column order
    numeric: dict  # name -> NumericColumnPlan
    categorical: dict  # name -> CategoricalColumnPlan
    dropped: tuple  # (name, reason) pairs
    target: str
    dedup_enabled: bool = True
    z_threshold: float = ROBUST_Z_THRESHOLD

    def output_columns(self) -> list[str]:
        out = []
        for name in self.feature_order:
            if name in self.numeric:
                out.append(name)
            else:
                for level in self.categorical[name].levels:
                    out.append(f"{name}={level}")
                out.append(f"{name}={UNSEEN}")
        return out

    def output_groups(self) -> dict:
        """Source feature -> the output columns derived from it."""
        groups = {}
        for name in self.feature_order:
            if name in self.numeric:
                groups[name] = [name]
            else:
                groups[name] = [
                    f"{name}={level}" for level in self.categorical[name].levels
                ] + [f"{name}={UNSEEN}"]
        return groups

    def to_dict(self) -> dict:
        return {
            "feature_order": list(self.feature_order),
            "numeric": {
                n: {
                    "impute_value": p.impute_value,
                    "mean": p.mean,
                    "std": p.std,
                    "median": p.median,
                    "mad_scale": p.mad_scale,
                }
                for n, p in self.numeric.items()
            },
            "categorical": {
                n: {"impute_level": p.impute_level, "levels": list(p.levels)}
                for n, p in self.categorical.items()
            },
            "dropped": [list(pair) for pair in self.dropped],
            "target": self.target,
            "dedup_enabled": self.dedup_enabled,
            "z_threshold": self.z_threshold,
        }

    @staticmethod
    def from_dict(d: dict) -> "PreprocessPlan":
        return PreprocessPlan(
            feature_order=tuple(d["feature_order"]),
            numeric={n: NumericColumnPlan(**p) for n, p in d["numeric"].items()},
            categorical={
                n: CategoricalColumnPlan(p["impute_level"], tuple(p["levels"]))
                for n, p in d["categorical"].items()
            },
            dropped=tuple((name, reason) for name, reason in d["dropped"]),
            target=d["target"],
            dedup_enabled=d["dedup_enabled"],
            z_threshold=d["z_threshold"],
        )


def _imputed_numeric(table: Table, name: str, impute_value: float) -> np.ndarray:
    values = table.column(name).astype(np.float64).copy()
    values[table.mask(name)] = impute_value
    return values


def _mapped_codes(table: Table, name: str, plan: CategoricalColumnPlan) -> np.ndarray:
    """Codes into plan.levels (+len(levels) for unseen); missing imputed."""
    level_index = {lv: i for i, lv in enumerate(plan.levels)}
    unseen = len(plan.levels)
    table_levels = table.levels(name)
    remap = np.array(
        [level_index.get(lv, unseen) for lv in table_levels], dtype=np.int64
    )
    codes = table.column(name)
    out = np.empty(len(codes), dtype=np.int64)
    miss = table.mask(name)
    out[~miss] = remap[codes[~miss]]
    out[miss] = level_index[plan.impute_level]
    return out


def _duplicate_mask(feature_rows: np.ndarray) -> np.ndarray:
    """True at rows that exactly repeat an earlier row."""
    _, first = np.unique(feature_rows, axis=0, return_index=True)
    keep = np.zeros(len(feature_rows), dtype=bool)
    keep[first] = True
    return ~keep


def fit_plan(
    train: Table,
    dedup_enabled: bool = True,
    z_threshold: float = ROBUST_Z_THRESHOLD,
) -> PreprocessPlan:
    if train.n_rows == 0:
        raise DataError("cannot fit a preprocessing plan on an empty table")
    target = train.target_name
    if target is None:
        raise DataError("training table has no target column")

    feature_schemas = [s for s in train.schemas if s.role == "feature"]
    dropped: list[tuple[str, str]] = []
    numeric_imputes: dict[str, float] = {}
    categorical: dict[str, CategoricalColumnPlan] = {}

    for s in feature_schemas:
        miss = train.mask(s.name)
        if miss.all():
            dropped.append((s.name, "all values missing"))
            continue
        if s.kind == NUMERIC:
            numeric_imputes[s.name] = float(np.median(train.column(s.name)[~miss]))
        else:
            codes = train.column(s.name)[~miss]
            counts = np.bincount(codes)
            modal_code = int(np.argmax(counts))  # ties -> smallest code
            observed = sorted(int(c) for c in np.unique(codes))
            levels = tuple(train.levels(s.name)[c] for c in observed)
            categorical[s.name] = CategoricalColumnPlan(
                impute_level=train.levels(s.name)[modal_code], levels=levels
            )

    # Surviving rows for the scaling statistics: impute, then deduplicate.
    candidate_order = [
        s.name for s in feature_schemas if s.name in numeric_imputes or s.name in categorical
    ]
    if candidate_order:
        blocks = []
        for name in candidate_order:
            if name in numeric_imputes:
                blocks.append(_imputed_numeric(train, name, numeric_imputes[name]))
            else:
                blocks.append(_mapped_codes(train, name, categorical[name]).astype(np.float64))
        matrix = np.column_stack(blocks)
        survivors = ~_duplicate_mask(matrix) if dedup_enabled else np.ones(train.n_rows, bool)
    else:
        survivors = np.ones(train.n_rows, dtype=bool)

    numeric: dict[str, NumericColumnPlan] = {}
    for name, impute in numeric_imputes.items():
        values = _imputed_numeric(train, name, impute)[survivors]
        mean = float(values.mean())
        std = float(values.std())
        if std <= 0.0:
            dropped.append((name, "constant column"))
            continue
        median = float(np.median(values))
        mad = float(np.median(np.abs(values - median)))
        numeric[name] = NumericColumnPlan(
            impute_value=impute,
            mean=mean,
            std=std,
            median=median,
            mad_scale=MAD_SCALE * mad,
        )

    feature_order = tuple(
        s.name for s in feature_schemas if s.name in numeric or s.name in categorical
    )
    if not feature_order:
        raise DataError("no usable feature columns after preprocessing")
    return PreprocessPlan(
        feature_order=feature_order,
        numeric=numeric,
        categorical=categorical,
        dropped=tuple(dropped),
        target=target,
        dedup_enabled=dedup_enabled,
        z_threshold=z_threshold,
    )


def apply_plan(plan: PreprocessPlan, table: Table, is_training: bool) -> Table:
    """Transform a table with a fitted plan.

    Produces a table whose features are all numeric: z-scored originals
    plus 0/1 one-hot columns, in the plan's column order, followed by the
    untouched target column when present.  Row-dropping (deduplication,
    outlier removal) happens only when `is_training`.
    """
    for name in plan.feature_order:
        schema = table.schema(name)  # raises SchemaError when absent
        want_numeric = name in plan.numeric
        if want_numeric != (schema.kind == NUMERIC):
            raise SchemaError(
                f"column {name!r} kind {schema.kind!r} does not match the plan"
            )

    imputed_numeric = {
        name: _imputed_numeric(table, name, plan.numeric[name].impute_value)
        for name in plan.feature_order
        if name in plan.numeric
    }
    mapped_codes = {
        name: _mapped_codes(table, name, plan.categorical[name])
        for name in plan.feature_order
        if name in plan.categorical
    }

    keep = np.ones(table.n_rows, dtype=bool)
    if is_training:
        if plan.dedup_enabled:
            blocks = [
                imputed_numeric[n] if n in imputed_numeric else mapped_codes[n].astype(np.float64)
                for n in plan.feature_order
            ]
            keep &= ~_duplicate_mask(np.column_stack(blocks))
        for name, p in plan.numeric.items():
            if p.mad_scale > 0.0:
                z = np.abs(imputed_numeric[name] - p.median) / p.mad_scale
                keep &= z <= plan.z_threshold

    schemas: list[ColumnSchema] = []
    columns: dict[str, np.ndarray] = {}
    masks: dict[str, np.ndarray] = {}
    n_out = int(keep.sum())
    for name in plan.feature_order:
        if name in plan.numeric:
            p = plan.numeric[name]
            columns[name] = (imputed_numeric[name][keep] - p.mean) / p.std
            masks[name] = np.zeros(n_out, dtype=bool)
            schemas.append(ColumnSchema(name, NUMERIC))
        else:
            codes = mapped_codes[name][keep]
            cat = plan.categorical[name]
            for slot, level in enumerate(list(cat.levels) + [UNSEEN]):
                col_name = f"{name}={level}"
                columns[col_name] = (codes == slot).astype(np.float64)
                masks[col_name] = np.zeros(n_out, dtype=bool)
                schemas.append(ColumnSchema(col_name, NUMERIC))

    levels = {}
    if plan.target in table.column_names:
        s = table.schema(plan.target)
        schemas.append(ColumnSchema(plan.target, s.kind, ROLE_TARGET))
        columns[plan.target] = table.column(plan.target)[keep]
        masks[plan.target] = table.mask(plan.target)[keep]
        if s.kind in (CATEGORICAL, BINARY):
            levels[plan.target] = table.levels(plan.target)
    return Table(schemas, columns, masks, levels)


def feature_matrix(table: Table) -> tuple[np.ndarray, list[str]]:
    """Stack the feature columns of a preprocessed table into a matrix."""
    names = table.feature_names()
    if not names:
        raise SchemaError("table has no feature columns")
    cols = []
    for name in names:
        if table.schema(name).kind != NUMERIC:
            raise SchemaError(f"feature {name!r} is not numeric; preprocess first")
        if table.mask(name).any():
            raise SchemaError(f"feature {name!r} still has missing values")
        cols.append(table.column(name))
    return np.column_stack(cols), names

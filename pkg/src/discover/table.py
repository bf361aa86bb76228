"""Typed column-major tables: CSV ingestion, schema inference, splitting.

A Table stores numeric columns as float64 arrays and categorical/binary
columns as integer codes into a per-column level list, each with a boolean
missing mask.  Tables are immutable after construction (all arrays are
frozen), so they can be shared freely across workers.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError, SchemaError
from .rng import Rng

NUMERIC = "numeric"
CATEGORICAL = "categorical"
BINARY = "binary"
KINDS = (NUMERIC, CATEGORICAL, BINARY)

ROLE_FEATURE = "feature"
ROLE_TARGET = "target"
ROLE_IGNORED = "ignored"

DEFAULT_MISSING_TOKENS = ("", "NA", "NaN")

# Recognized two-value vocabularies that make a column binary rather than
# numeric/categorical.  Lowercased comparison; {0, 1} is matched numerically.
_BOOLEAN_PAIRS = (
    frozenset({"true", "false"}),
    frozenset({"t", "f"}),
    frozenset({"yes", "no"}),
    frozenset({"y", "n"}),
)


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: str
    role: str = ROLE_FEATURE

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown column kind {self.kind!r}")
        if self.role not in (ROLE_FEATURE, ROLE_TARGET, ROLE_IGNORED):
            raise SchemaError(f"unknown column role {self.role!r}")


@dataclass(frozen=True)
class SplitSpec:
    holdout_fraction: float
    stratified: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.holdout_fraction < 1.0:
            raise DataError(
                f"holdout_fraction must be in (0,1), got {self.holdout_fraction}"
            )


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr)
    arr.flags.writeable = False
    return arr


class Table:
    """Immutable typed table.

    `columns` maps name -> float64 array (numeric) or int32 code array
    (categorical/binary, code -1 at missing positions).  `masks` maps
    name -> boolean missing mask.  `levels` maps categorical/binary column
    names to their ordered level strings (codes index into this list).
    """

    def __init__(
        self,
        schemas: Sequence[ColumnSchema],
        columns: Mapping[str, np.ndarray],
        masks: Mapping[str, np.ndarray],
        levels: Mapping[str, Sequence[str]],
    ):
        names = [s.name for s in schemas]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names")
        n_targets = sum(1 for s in schemas if s.role == ROLE_TARGET)
        if n_targets > 1:
            raise SchemaError("more than one target column")
        if set(columns) != set(names) or set(masks) != set(names):
            raise SchemaError("columns/masks do not match schemas")

        lengths = {len(columns[n]) for n in names} | {len(masks[n]) for n in names}
        if len(lengths) > 1:
            raise SchemaError(f"column lengths differ: {sorted(lengths)}")
        self.n_rows = lengths.pop() if lengths else 0

        self.schemas = tuple(schemas)
        self._by_name = {s.name: s for s in self.schemas}
        self._columns = {}
        self._masks = {n: _frozen(np.asarray(masks[n], dtype=bool)) for n in names}
        self._levels = {}
        for s in self.schemas:
            arr = np.asarray(columns[s.name])
            if s.kind == NUMERIC:
                self._columns[s.name] = _frozen(arr.astype(np.float64))
            else:
                lv = tuple(levels.get(s.name, ()))
                codes = arr.astype(np.int32)
                valid = codes[~self._masks[s.name]]
                if valid.size and (valid.min() < 0 or valid.max() >= len(lv)):
                    raise SchemaError(f"codes out of range for column {s.name!r}")
                if s.kind == BINARY and len(lv) != 2:
                    raise SchemaError(f"binary column {s.name!r} needs 2 levels")
                self._columns[s.name] = _frozen(codes)
                self._levels[s.name] = lv

    # -- accessors ---------------------------------------------------------

    @property
    def column_names(self) -> list[str]:
        return [s.name for s in self.schemas]

    def schema(self, name: str) -> ColumnSchema:
        try:
            return self._by_name[name]
        except KeyError:
            raise SchemaError(f"no column named {name!r}") from None

    def column(self, name: str) -> np.ndarray:
        self.schema(name)
        return self._columns[name]

    def mask(self, name: str) -> np.ndarray:
        self.schema(name)
        return self._masks[name]

    def levels(self, name: str) -> tuple[str, ...]:
        s = self.schema(name)
        if s.kind == NUMERIC:
            raise SchemaError(f"numeric column {name!r} has no levels")
        return self._levels[name]

    @property
    def target_name(self) -> str | None:
        for s in self.schemas:
            if s.role == ROLE_TARGET:
                return s.name
        return None

    def feature_names(self) -> list[str]:
        return [s.name for s in self.schemas if s.role == ROLE_FEATURE]

    # -- derived tables ------------------------------------------------------

    def with_roles(
        self, target: str | None = None, ignored: Iterable[str] = ()
    ) -> "Table":
        ignored = set(ignored)
        if target is not None:
            self.schema(target)
        for n in ignored:
            self.schema(n)
        if target in ignored:
            raise SchemaError(f"target {target!r} cannot also be ignored")
        schemas = []
        for s in self.schemas:
            if s.name == target:
                schemas.append(replace(s, role=ROLE_TARGET))
            elif s.name in ignored:
                schemas.append(replace(s, role=ROLE_IGNORED))
            else:
                schemas.append(replace(s, role=ROLE_FEATURE))
        return Table(schemas, self._columns, self._masks, self._levels)

    def take(self, row_indices: np.ndarray) -> "Table":
        idx = np.asarray(row_indices)
        cols = {n: self._columns[n][idx] for n in self._columns}
        masks = {n: self._masks[n][idx] for n in self._masks}
        return Table(self.schemas, cols, masks, self._levels)

    def drop_columns(self, names: Iterable[str]) -> "Table":
        drop = set(names)
        schemas = [s for s in self.schemas if s.name not in drop]
        cols = {s.name: self._columns[s.name] for s in schemas}
        masks = {s.name: self._masks[s.name] for s in schemas}
        levels = {n: v for n, v in self._levels.items() if n not in drop}
        return Table(schemas, cols, masks, levels)

    # -- target views ----------------------------------------------------------

    def target_values(self) -> np.ndarray:
        """Raw target as float64: numeric values, or 0/1 for two-level
        categorical/binary targets with positive class = second level in
        lexicographic order."""
        name = self.target_name
        if name is None:
            raise SchemaError("table has no target column")
        s = self.schema(name)
        if s.kind == NUMERIC:
            return self.column(name).astype(np.float64)
        lv = self.levels(name)
        if len(lv) != 2:
            raise SchemaError(
                f"target {name!r} has {len(lv)} levels; need 2 for classification"
            )
        return (self.column(name) == self.positive_code()).astype(np.float64)

    def positive_level(self) -> str:
        name = self.target_name
        lv = self.levels(name)
        return max(lv)

    def positive_code(self) -> int:
        name = self.target_name
        return self.levels(name).index(self.positive_level())

    def __repr__(self):
        kinds = ", ".join(f"{s.name}:{s.kind}" for s in self.schemas)
        return f"Table({self.n_rows} rows; {kinds})"


# -- CSV ingestion -------------------------------------------------------------


def _try_float(text: str) -> float | None:
    try:
        return float(text)
    except ValueError:
        return None


def _infer_kind(values: list[str]) -> str:
    """Kind of a column from its non-missing cell texts.

    Two distinct values are binary only when they form a recognized
    boolean vocabulary ({0,1} numerically, or true/false-style words);
    otherwise a column is numeric when at least 95% of the cells parse
    as reals, else categorical.  All-missing columns default to numeric.
    """
    if not values:
        return NUMERIC
    distinct = set(values)
    if len(distinct) == 2:
        parsed = {_try_float(v) for v in distinct}
        if parsed == {0.0, 1.0}:
            return BINARY
        if frozenset(v.lower() for v in distinct) in _BOOLEAN_PAIRS:
            return BINARY
    n_numeric = sum(1 for v in values if _try_float(v) is not None)
    if n_numeric / len(values) >= 0.95:
        return NUMERIC
    return CATEGORICAL


def read_csv(
    path: str | Path,
    schema_hints: Mapping[str, str] | None = None,
    missing_tokens: Sequence[str] = DEFAULT_MISSING_TOKENS,
) -> Table:
    """Read an RFC-4180-style CSV with a header row into a typed Table.

    Cells are stripped of surrounding whitespace; cells equal to one of
    `missing_tokens` are marked missing.  `schema_hints` forces the kind
    of specific columns; in a hinted/inferred numeric column, non-missing
    cells that fail to parse are marked missing as well.
    """
    path = Path(path)
    hints = dict(schema_hints or {})
    missing_set = set(missing_tokens)
    try:
        with open(path, newline="", encoding="utf-8-sig") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: empty file") from None
            header = [h.strip() for h in header]
            rows = []
            for i, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise DataError(
                        f"{path}: line {i} has {len(row)} fields, header has {len(header)}"
                    )
                rows.append([cell.strip() for cell in row])
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    if not rows:
        raise DataError(f"{path}: no data rows")
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate header names")
    for name in hints:
        if name not in header:
            raise DataError(f"schema hint for unknown column {name!r}")
        if hints[name] not in KINDS:
            raise DataError(f"schema hint for {name!r} has unknown kind {hints[name]!r}")

    n = len(rows)
    schemas, columns, masks, levels = [], {}, {}, {}
    for j, name in enumerate(header):
        cells = [row[j] for row in rows]
        miss = np.array([c in missing_set for c in cells], dtype=bool)
        present = [c for c, m in zip(cells, miss) if not m]
        kind = hints.get(name) or _infer_kind(present)
        if kind == NUMERIC:
            data = np.full(n, np.nan)
            for i, (c, m) in enumerate(zip(cells, miss)):
                if m:
                    continue
                v = _try_float(c)
                if v is None:
                    miss[i] = True
                else:
                    data[i] = v
            columns[name] = data
        else:
            lv = sorted(set(present))
            if kind == BINARY and len(lv) != 2:
                raise DataError(
                    f"column {name!r} hinted binary but has {len(lv)} distinct values"
                )
            index = {v: k for k, v in enumerate(lv)}
            codes = np.full(n, -1, dtype=np.int32)
            for i, (c, m) in enumerate(zip(cells, miss)):
                if not m:
                    codes[i] = index[c]
            columns[name] = codes
            levels[name] = lv
        masks[name] = miss
        schemas.append(ColumnSchema(name, kind))
    return Table(schemas, columns, masks, levels)


def _format_numeric(x: float) -> str:
    if x == int(x) and abs(x) < 1e16:
        return repr(x)
    return repr(x)


def write_csv(table: Table, path: str | Path) -> None:
    """Write a Table back to CSV; missing cells become empty fields."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(table.column_names)
        cols, masks = [], []
        for s in table.schemas:
            cols.append(table.column(s.name))
            masks.append(table.mask(s.name))
        for i in range(table.n_rows):
            row = []
            for s, col, miss in zip(table.schemas, cols, masks):
                if miss[i]:
                    row.append("")
                elif s.kind == NUMERIC:
                    row.append(_format_numeric(float(col[i])))
                else:
                    row.append(table.levels(s.name)[col[i]])
            writer.writerow(row)


# -- splitting ------------------------------------------------------------------


def _holdout_count(fraction: float, n: int) -> int:
    return int(np.floor(fraction * n + 0.5))


def split(table: Table, spec: SplitSpec) -> tuple[Table, Table]:
    """Deterministic exact partition into (train, holdout).

    When `spec.stratified` and the target is categorical or binary, rows
    are allocated per class: each class is shuffled by a child stream
    derived from the class code, and classes with at least two members
    land on both sides.  Partitions preserve original row order.
    """
    n = table.n_rows
    if n < 5:
        raise DataError(f"need at least 5 rows to split, got {n}")

    target = table.target_name
    stratify = (
        spec.stratified
        and target is not None
        and table.schema(target).kind in (CATEGORICAL, BINARY)
    )
    rng = Rng(spec.seed)
    if stratify:
        codes = table.column(target)
        miss = table.mask(target)
        holdout_idx = []
        class_codes = sorted(int(c) for c in np.unique(codes[~miss]))
        groups = [(c, np.flatnonzero((codes == c) & ~miss)) for c in class_codes]
        if miss.any():
            groups.append((-1, np.flatnonzero(miss)))
        for code, idx in groups:
            n_c = len(idx)
            k_c = _holdout_count(spec.holdout_fraction, n_c)
            if n_c >= 2:
                k_c = min(max(k_c, 1), n_c - 1)
            else:
                k_c = 0
            shuffled = rng.spawn(code + 1).shuffle(idx)
            holdout_idx.extend(shuffled[:k_c].tolist())
        hold = np.array(sorted(holdout_idx), dtype=np.int64)
    else:
        k = _holdout_count(spec.holdout_fraction, n)
        if k == 0 or k == n:
            raise DataError(
                f"holdout_fraction {spec.holdout_fraction} leaves an empty partition for {n} rows"
            )
        perm = rng.permutation(n)
        hold = np.sort(perm[:k])

    if len(hold) == 0 or len(hold) == n:
        raise DataError(
            f"holdout_fraction {spec.holdout_fraction} leaves an empty partition for {n} rows"
        )
    in_hold = np.zeros(n, dtype=bool)
    in_hold[hold] = True
    train_idx = np.flatnonzero(~in_hold)
    return table.take(train_idx), table.take(hold)

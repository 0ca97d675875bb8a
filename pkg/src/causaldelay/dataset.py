"""Tabular order data: loading, cleaning, encoding and fold partitioning.

A :class:`DataTable` is an immutable column store. Missing cells are
represented per kind: ``nan`` for numeric and binary columns, ``None`` for
categorical columns and ``NaT`` for dates. :func:`clean` removes them by
whole-row deletion, and :func:`encode` turns a clean table into the dense
numeric :class:`DesignMatrix` the estimators consume.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError

KINDS = ("numeric", "categorical", "binary", "date")
ROLES = ("outcome", "treatment", "covariate", "ignored")


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    kind: str = "numeric"
    role: str = "covariate"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.role not in ROLES:
            raise DataError(f"column {self.name!r}: unknown role {self.role!r}")

    @classmethod
    def from_dict(cls, d: Mapping) -> "ColumnSpec":
        return cls(name=d["name"], kind=d.get("kind", "numeric"), role=d.get("role", "covariate"))

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "role": self.role}


def _as_column(kind: str, values) -> np.ndarray:
    if kind in ("numeric", "binary"):
        return np.asarray(values, dtype=float)
    if kind == "date":
        return np.asarray(values, dtype="datetime64[D]")
    arr = np.empty(len(values), dtype=object)
    arr[:] = [None if v is None else str(v) for v in values]
    return arr


def _missing(kind: str, values: np.ndarray) -> np.ndarray:
    if kind in ("numeric", "binary"):
        return np.isnan(values)
    if kind == "date":
        return np.isnat(values)
    return np.array([v is None for v in values], dtype=bool)


class DataTable:
    """Immutable typed column store."""

    def __init__(self, columns: Iterable[tuple[ColumnSpec, Sequence]]):
        specs: list[ColumnSpec] = []
        data: dict[str, np.ndarray] = {}
        n_rows = None
        for spec, values in columns:
            if spec.name in data:
                raise DataError(f"duplicate column {spec.name!r}")
            arr = _as_column(spec.kind, values)
            arr.setflags(write=False)
            if n_rows is None:
                n_rows = len(arr)
            elif len(arr) != n_rows:
                raise DataError(
                    f"column {spec.name!r} has {len(arr)} rows, expected {n_rows}"
                )
            specs.append(spec)
            data[spec.name] = arr
        self._specs = tuple(specs)
        self._data = data
        self.n_rows = 0 if n_rows is None else n_rows

    @property
    def specs(self) -> tuple[ColumnSpec, ...]:
        return self._specs

    @property
    def names(self) -> list[str]:
        return [s.name for s in self._specs]

    @property
    def columns(self) -> list[tuple[ColumnSpec, np.ndarray]]:
        return [(s, self._data[s.name]) for s in self._specs]

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._data[name]
        except KeyError:
            raise KeyError(f"no column {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._data

    def __len__(self) -> int:
        return self.n_rows

    def spec(self, name: str) -> ColumnSpec:
        for s in self._specs:
            if s.name == name:
                return s
        raise KeyError(f"no column {name!r}")

    def with_column(self, spec: ColumnSpec, values: Sequence) -> "DataTable":
        cols = [(s, v) for s, v in self.columns if s.name != spec.name]
        return DataTable(cols + [(spec, values)])

    def with_roles(self, roles: Mapping[str, str]) -> "DataTable":
        return DataTable(
            (ColumnSpec(s.name, s.kind, roles.get(s.name, s.role)), v)
            for s, v in self.columns
        )

    def take(self, rows) -> "DataTable":
        rows = np.asarray(rows)
        return DataTable((s, v[rows]) for s, v in self.columns)

    def missing_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_rows, dtype=bool)
        for s, v in self.columns:
            mask |= _missing(s.kind, v)
        return mask

    def equals(self, other: "DataTable") -> bool:
        if self.specs != other.specs or self.n_rows != other.n_rows:
            return False
        for s, v in self.columns:
            w = other[s.name]
            if s.kind in ("numeric", "binary"):
                if not np.array_equal(v, w, equal_nan=True):
                    return False
            elif not np.array_equal(v, w):
                return False
        return True

    def __repr__(self) -> str:
        return f"DataTable(n_rows={self.n_rows}, columns={self.names})"


# ---------------------------------------------------------------- CSV I/O


def _parse_numeric(cell: str) -> float:
    try:
        x = float(cell)
    except ValueError:
        return math.nan
    return x if math.isfinite(x) else math.nan


_BINARY_TOKENS = {"0": 0.0, "1": 1.0, "false": 0.0, "true": 1.0, "no": 0.0, "yes": 1.0}


def _parse_binary(cell: str) -> float:
    token = cell.strip().lower()
    if token in _BINARY_TOKENS:
        return _BINARY_TOKENS[token]
    x = _parse_numeric(token)
    return x if x in (0.0, 1.0) else math.nan


def load_csv(path: str | Path, specs: Sequence[ColumnSpec]) -> DataTable:
    """Read a comma-separated UTF-8 file with a header row.

    Columns of the file not named in ``specs`` are ignored. Unparseable
    numeric or binary cells become missing; an unparseable date raises
    :class:`DataError` naming the (1-based, header excluded) row.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        index = {name: i for i, name in enumerate(header)}
        absent = [s.name for s in specs if s.name not in index]
        if absent:
            raise DataError(f"{path}: header lacks columns {absent}")
        raw: dict[str, list] = {s.name: [] for s in specs}
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            for s in specs:
                j = index[s.name]
                cell = row[j].strip() if j < len(row) else ""
                raw[s.name].append(_parse_cell(s, cell, row_no))
    return DataTable((s, raw[s.name]) for s in specs)


def _parse_cell(spec: ColumnSpec, cell: str, row_no: int):
    if spec.kind == "numeric":
        return _parse_numeric(cell) if cell else math.nan
    if spec.kind == "binary":
        return _parse_binary(cell) if cell else math.nan
    if spec.kind == "categorical":
        return cell or None
    if not cell:
        return np.datetime64("NaT")
    try:
        return np.datetime64(dt.date.fromisoformat(cell[:10]), "D")
    except ValueError:
        raise DataError(
            f"row {row_no}: cannot parse {cell!r} in date column {spec.name!r}"
        ) from None


def _format_cell(kind: str, value) -> str:
    if kind == "numeric":
        return "" if math.isnan(value) else repr(float(value))
    if kind == "binary":
        return "" if math.isnan(value) else str(int(value))
    if kind == "date":
        return "" if np.isnat(value) else str(value)
    return "" if value is None else str(value)


def write_csv(table: DataTable, path: str | Path) -> None:
    """Write ``table`` so that :func:`load_csv` reproduces it exactly."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.names)
        cols = table.columns
        for i in range(table.n_rows):
            writer.writerow([_format_cell(s.kind, v[i]) for s, v in cols])


# ---------------------------------------------------------------- cleaning


def clean(table: DataTable) -> tuple[DataTable, int, int]:
    """Drop rows with missing cells, then exact duplicates.

    Duplicates are judged on all non-ignored columns; the first occurrence
    survives and row order is preserved. Returns the cleaned table and the
    two removal counts.
    """
    missing = table.missing_mask()
    kept = np.flatnonzero(~missing)
    key_cols = [v for s, v in table.columns if s.role != "ignored"]
    seen: set = set()
    unique = []
    for i in kept:
        key = tuple(c[i] for c in key_cols)
        if key not in seen:
            seen.add(key)
            unique.append(i)
    if not unique:
        raise DataError("cleaning removed every row")
    removed_missing = int(missing.sum())
    removed_duplicates = len(kept) - len(unique)
    return table.take(np.asarray(unique, dtype=int)), removed_missing, removed_duplicates


def derive_quarter(table: DataTable, date_column: str, name: str = "Season") -> DataTable:
    """Add a categorical column with the calendar quarter (Q1..Q4) of a date."""
    if date_column not in table:
        raise DataError(f"no column {date_column!r}")
    if table.spec(date_column).kind != "date":
        raise DataError(f"column {date_column!r} is not a date column")
    dates = table[date_column]
    months = dates.astype("datetime64[M]").astype(int) % 12 + 1
    values = [None if np.isnat(d) else f"Q{(m - 1) // 3 + 1}" for d, m in zip(dates, months)]
    return table.with_column(ColumnSpec(name, "categorical", "covariate"), values)


# ---------------------------------------------------------------- encoding


@dataclass(frozen=True)
class DesignMatrix:
    values: np.ndarray
    feature_names: tuple[str, ...]
    source_column: Mapping[str, ColumnSpec]
    scaling: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def index(self, feature: str) -> int:
        try:
            return self.feature_names.index(feature)
        except ValueError:
            raise KeyError(f"no feature {feature!r}") from None

    def column(self, feature: str) -> np.ndarray:
        return self.values[:, self.index(feature)]

    def features_of(self, column: str) -> list[str]:
        return [f for f in self.feature_names if self.source_column[f].name == column]

    def features_with_role(self, role: str) -> list[str]:
        return [f for f in self.feature_names if self.source_column[f].role == role]

    def subset(self, features: Sequence[str]) -> "DesignMatrix":
        idx = [self.index(f) for f in features]
        return DesignMatrix(
            values=self.values[:, idx],
            feature_names=tuple(features),
            source_column={f: self.source_column[f] for f in features},
            scaling={f: s for f, s in self.scaling.items() if f in features},
        )

    def take(self, rows) -> "DesignMatrix":
        return DesignMatrix(self.values[rows], self.feature_names, self.source_column, self.scaling)

    def denormalize(self, feature: str, value: float) -> float:
        """Map a min-max scaled value back to original units."""
        if feature not in self.scaling:
            return value
        lo, hi = self.scaling[feature]
        return lo + value * (hi - lo)


def encode(table: DataTable, normalize: Iterable[str] = ()) -> DesignMatrix:
    """One-hot encode categoricals, min-max scale the requested numerics.

    Date and ignored columns are skipped. Categorical levels are sorted so
    the output layout does not depend on row order; indicator features are
    named ``<column>_<level>``.
    """
    normalize = set(normalize)
    for name in normalize:
        if name not in table:
            raise DataError(f"cannot normalize unknown column {name!r}")
        if table.spec(name).kind != "numeric":
            raise DataError(f"cannot normalize non-numeric column {name!r}")
    if table.missing_mask().any():
        raise DataError("encode requires a clean table (missing cells present)")

    blocks: list[np.ndarray] = []
    names: list[str] = []
    source: dict[str, ColumnSpec] = {}
    scaling: dict[str, tuple[float, float]] = {}
    for spec, v in table.columns:
        if spec.role == "ignored" or spec.kind == "date":
            continue
        if spec.kind == "categorical":
            levels = sorted(set(v))
            for level in levels:
                fname = f"{spec.name}_{level}"
                names.append(fname)
                source[fname] = spec
                blocks.append((v == level).astype(float))
        elif spec.kind == "binary":
            if not np.isin(v, (0.0, 1.0)).all():
                raise DataError(f"binary column {spec.name!r} has values outside {{0, 1}}")
            names.append(spec.name)
            source[spec.name] = spec
            blocks.append(np.asarray(v, dtype=float))
        else:
            x = np.asarray(v, dtype=float)
            if spec.name in normalize:
                lo, hi = float(x.min()), float(x.max())
                if hi == lo:
                    raise DataError(f"column {spec.name!r} is constant; cannot normalize")
                x = (x - lo) / (hi - lo)
                scaling[spec.name] = (lo, hi)
            names.append(spec.name)
            source[spec.name] = spec
            blocks.append(x)
    values = np.column_stack(blocks) if blocks else np.empty((table.n_rows, 0))
    return DesignMatrix(values, tuple(names), source, scaling)


# ---------------------------------------------------------------- folds


@dataclass(frozen=True)
class FoldPlan:
    n_rows: int
    k: int
    seed: int
    assignment: np.ndarray

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)


def make_folds(n_rows: int, k: int, seed: int, strata: Sequence | None = None) -> FoldPlan:
    """Random partition of ``range(n_rows)`` into ``k`` folds.

    Rows are shuffled (within each stratum when ``strata`` is given, strata
    visited in sorted order) and dealt round-robin, so overall fold sizes
    differ by at most one and each stratum is spread evenly across folds.
    """
    if k < 2:
        raise DataError(f"need at least 2 folds, got {k}")
    if n_rows < k:
        raise DataError(f"cannot split {n_rows} rows into {k} folds")
    rng = np.random.default_rng(seed)
    if strata is None:
        order = rng.permutation(n_rows)
    else:
        strata = np.asarray(strata)
        if len(strata) != n_rows:
            raise DataError("strata length differs from n_rows")
        parts = [rng.permutation(np.flatnonzero(strata == s)) for s in np.unique(strata)]
        order = np.concatenate(parts)
    assignment = np.empty(n_rows, dtype=np.int64)
    assignment[order] = np.arange(n_rows) % k
    assignment.setflags(write=False)
    return FoldPlan(n_rows=n_rows, k=k, seed=seed, assignment=assignment)


# ---------------------------------------------------------------- summaries


@dataclass(frozen=True)
class DelayStats:
    delayed_rate: float
    on_time_rate: float
    max_delay: float
    mean_delay: float
    std_delay: float
    mean_delay_all: float
    std_delay_all: float

    def to_dict(self) -> dict:
        return {
            "delayed_rate": self.delayed_rate,
            "on_time_rate": self.on_time_rate,
            "max_delay": self.max_delay,
            "mean_delay_delayed_only": self.mean_delay,
            "std_delay_delayed_only": self.std_delay,
            "mean_delay_all_orders": self.mean_delay_all,
            "std_delay_all_orders": self.std_delay_all,
        }


def _sd(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1)) if len(x) > 1 else 0.0


def summary_stats(delays) -> DelayStats:
    """Delay-rate statistics in the shape of a per-buyer summary table.

    An order is delayed when its delay is strictly positive. ``mean_delay``
    and ``std_delay`` (sample standard deviation) are taken over delayed
    orders only; the ``*_all`` variants use every order.
    """
    x = np.asarray(delays, dtype=float)
    if x.size == 0:
        raise DataError("summary_stats needs at least one delay value")
    late = x[x > 0]
    rate = late.size / x.size
    return DelayStats(
        delayed_rate=rate,
        on_time_rate=1.0 - rate,
        max_delay=float(late.max()) if late.size else 0.0,
        mean_delay=float(late.mean()) if late.size else 0.0,
        std_delay=_sd(late),
        mean_delay_all=float(x.mean()),
        std_delay_all=_sd(x),
    )

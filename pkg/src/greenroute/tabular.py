"""Column-typed tables plus the preprocessing pipeline (impute, dedupe,
encode, scale, feature engineering) with replayable fitted transforms.

Every operation returns a new Dataset; the input is never mutated. Each
applied transform is appended to ``transform_log`` together with the
statistics fitted on that data (column means, category vocabularies,
scaler parameters), so the exact same mapping can be replayed on unseen
rows via :func:`replay`.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaError, ValidationError

NUMERIC = "numeric"
CATEGORICAL = "categorical"

_UNSET = object()


@dataclass(frozen=True)
class Column:
    name: str
    kind: str  # NUMERIC or CATEGORICAL

    def __post_init__(self):
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise ValidationError(f"column {self.name!r}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class Recipe:
    """Preprocessing plan. Maps are column name -> method string.

    impute: {col: "mean"}; encoding: {col: "one_hot" | "label"};
    scaling: {col: "min_max" | "z_score" | "none"}; derived entries are
    (new_name, numerator_col, denominator_col) ratio features.
    """

    impute: dict = field(default_factory=dict)
    dedupe: bool = False
    encoding: dict = field(default_factory=dict)
    scaling: dict = field(default_factory=dict)
    poly_degree: int = 1
    interactions: bool = False
    derived: tuple = ()

    def __post_init__(self):
        if self.poly_degree not in (1, 2):
            raise ValidationError(f"poly_degree must be 1 or 2, got {self.poly_degree}")
        for col, how in self.impute.items():
            if how != "mean":
                raise ValidationError(f"impute[{col!r}]: only 'mean' is supported, got {how!r}")
        for col, how in self.encoding.items():
            if how not in ("one_hot", "label"):
                raise ValidationError(f"encoding[{col!r}]: unknown method {how!r}")
        for col, how in self.scaling.items():
            if how not in ("min_max", "z_score", "none"):
                raise ValidationError(f"scaling[{col!r}]: unknown method {how!r}")


class Dataset:
    """Immutable column-typed table.

    Numeric cells are float64 with NaN as the missing marker; categorical
    cells are str with None as the missing marker.
    """

    def __init__(self, columns, data, target=None, transform_log=()):
        self.columns = tuple(columns)
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names")
        self._data = {}
        n = None
        for col in self.columns:
            arr = data[col.name]
            if col.kind == NUMERIC:
                arr = np.array(arr, dtype=np.float64)
            else:
                arr = np.array(arr, dtype=object)
            if n is None:
                n = arr.shape[0]
            elif arr.shape[0] != n:
                raise SchemaError(f"column {col.name!r} has {arr.shape[0]} rows, expected {n}")
            arr.flags.writeable = False
            self._data[col.name] = arr
        self.n_rows = 0 if n is None else int(n)
        if target is not None and self.kind_of(target) != NUMERIC:
            raise SchemaError(f"target {target!r} must be numeric")
        self.target = target
        self.transform_log = tuple(transform_log)

    @property
    def column_names(self):
        return [c.name for c in self.columns]

    def kind_of(self, name):
        for c in self.columns:
            if c.name == name:
                return c.kind
        raise SchemaError(f"no such column: {name!r}")

    def col(self, name):
        if name not in self._data:
            raise SchemaError(f"no such column: {name!r}")
        return self._data[name]

    def numeric_names(self):
        return [c.name for c in self.columns if c.kind == NUMERIC]

    def matrix(self, names=None):
        """Stack the given numeric columns into an (n, p) float matrix."""
        if names is None:
            names = self.numeric_names()
        cols = []
        for name in names:
            if self.kind_of(name) != NUMERIC:
                raise SchemaError(f"column {name!r} is not numeric")
            arr = self.col(name)
            if np.isnan(arr).any():
                raise ValidationError(f"column {name!r} has missing cells")
            cols.append(arr)
        if not cols:
            return np.empty((self.n_rows, 0))
        return np.column_stack(cols)

    def replace(self, columns=None, data=None, target=_UNSET, log_entry=None):
        """Build a new Dataset with updated columns/cells and one more log entry."""
        new_cols = self.columns if columns is None else tuple(columns)
        merged = dict(self._data)
        if data is not None:
            merged.update(data)
        new_data = {c.name: merged[c.name] for c in new_cols}
        new_target = self.target if target is _UNSET else target
        if new_target is not None and new_target not in new_data:
            new_target = None
        log = self.transform_log
        if log_entry is not None:
            if not log:
                # snapshot the raw schema the log replays from
                log = ({"op": "schema", "columns": [[c.name, c.kind] for c in self.columns]},)
            log = log + (log_entry,)
        return Dataset(new_cols, new_data, target=new_target, transform_log=log)

    def schema(self):
        return [(c.name, c.kind) for c in self.columns]


def read_csv(path, schema, target=None):
    """Load a CSV whose header matches ``schema`` (list of (name, kind)).

    Empty cells become missing markers. Numeric cells must parse with a
    '.' decimal point; anything else is reported with its row and column.
    """
    if not os.path.exists(path):
        raise ValidationError(f"no such file: {path}")
    columns = [Column(name, kind) for name, kind in schema]
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file, expected a header row") from None
        expected = [c.name for c in columns]
        if header != expected:
            raise SchemaError(f"{path}: header {header} does not match schema {expected}")
        raw = {c.name: [] for c in columns}
        for i, row in enumerate(reader):
            if len(row) != len(columns):
                raise SchemaError(f"{path}: row {i} has {len(row)} cells, expected {len(columns)}")
            for col, cell in zip(columns, row):
                if col.kind == NUMERIC:
                    if cell == "":
                        raw[col.name].append(math.nan)
                    else:
                        try:
                            raw[col.name].append(float(cell))
                        except ValueError:
                            raise SchemaError(
                                f"{path}: row {i}, column {col.name!r}: "
                                f"unparsable numeric value {cell!r}"
                            ) from None
                else:
                    raw[col.name].append(cell if cell != "" else None)
    return Dataset(columns, raw, target=target)


def write_csv(data, path):
    """Write a Dataset back out; floats keep full round-trip precision."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(data.column_names)
        cols = [(data.col(c.name), c.kind) for c in data.columns]
        for i in range(data.n_rows):
            row = []
            for arr, kind in cols:
                v = arr[i]
                if kind == NUMERIC:
                    row.append("" if math.isnan(v) else repr(float(v)))
                else:
                    row.append("" if v is None else v)
            writer.writerow(row)


def preprocess(data, recipe):
    """Apply imputation, deduplication, and categorical encoding."""
    out = data
    for name in recipe.impute:
        out = _fit_impute(out, name)
    if recipe.dedupe:
        out = _dedupe(out)
    for name, how in recipe.encoding.items():
        out = _fit_one_hot(out, name) if how == "one_hot" else _fit_label(out, name)
    return out


def scale(data, recipe):
    """Apply the per-column min_max / z_score scalers from the recipe."""
    out = data
    for name, how in recipe.scaling.items():
        if how == "none":
            continue
        out = _fit_scale(out, name, how)
    return out


def engineer_features(data, recipe):
    """Add squared, pairwise interaction, and ratio columns.

    On p numeric columns, degree 2 plus interactions yields
    p + p + p(p-1)/2 numeric columns (originals retained), then any
    derived ratios are appended.
    """
    out = data
    base = data.numeric_names()
    if recipe.poly_degree == 2:
        out = _poly_squares(out, base)
    if recipe.interactions:
        out = _interactions(out, base)
    for new_name, num, den in recipe.derived:
        out = _derived_ratio(out, new_name, num, den)
    return out


def fit_pipeline(data, recipe):
    """preprocess -> scale -> engineer_features, in the canonical order."""
    return engineer_features(scale(preprocess(data, recipe), recipe), recipe)


@dataclass(frozen=True)
class FittedRecipe:
    """A transform log with its fitted statistics, ready to replay."""

    steps: tuple

    @property
    def raw_schema(self):
        if self.steps and self.steps[0]["op"] == "schema":
            return [tuple(c) for c in self.steps[0]["columns"]]
        return None

    def to_dict(self):
        return {"steps": [dict(s) for s in self.steps]}

    @classmethod
    def from_dict(cls, d):
        return cls(steps=tuple(d["steps"]))


def fitted_recipe(data):
    """Capture a transformed Dataset's log as a replayable FittedRecipe."""
    return FittedRecipe(steps=data.transform_log)


def replay(fitted, new_data):
    """Re-apply fitted transforms to new rows without refitting anything.

    ``new_data`` must carry the same raw schema the recipe was fitted on.
    A category unseen at fit time maps to an all-zero one-hot row; values
    outside a fitted min/max range are not clipped.
    """
    schema = fitted.raw_schema
    if schema is not None:
        got = tuple((c.name, c.kind) for c in new_data.columns)
        want = tuple(tuple(c) for c in schema)
        if got != want:
            raise SchemaError(f"replay schema mismatch: expected {list(want)}, got {list(got)}")
    out = new_data
    for step in fitted.steps:
        op = step["op"]
        if op == "schema":
            continue
        if op == "impute_mean":
            out = _apply_impute(out, step["column"], step["mean"])
        elif op == "dedupe":
            out = _dedupe(out)
        elif op == "one_hot":
            out = _apply_one_hot(out, step["column"], step["vocabulary"])
        elif op == "label":
            out = _apply_label(out, step["column"], step["vocabulary"])
        elif op == "min_max":
            out = _apply_min_max(out, step["column"], step["min"], step["max"])
        elif op == "z_score":
            out = _apply_z_score(out, step["column"], step["mean"], step["stdev"])
        elif op == "poly_squares":
            out = _poly_squares(out, step["columns"])
        elif op == "interactions":
            out = _interactions(out, step["columns"])
        elif op == "derived":
            out = _derived_ratio(out, step["name"], step["numerator"], step["denominator"])
        else:
            raise SchemaError(f"unknown transform op {op!r}")
    return out


# -- individual transforms (fit_* computes stats, apply_* is replayable) -----


def _require_numeric(data, name):
    if data.kind_of(name) != NUMERIC:
        raise SchemaError(f"column {name!r} is not numeric")


def _fit_impute(data, name):
    _require_numeric(data, name)
    col = data.col(name)
    mask = np.isnan(col)
    if mask.all():
        raise ValidationError(f"column {name!r} is all-missing; mean is undefined")
    return _apply_impute(data, name, float(col[~mask].mean()))


def _apply_impute(data, name, mean):
    _require_numeric(data, name)
    col = data.col(name).copy()
    col[np.isnan(col)] = mean
    return data.replace(data={name: col},
                        log_entry={"op": "impute_mean", "column": name, "mean": mean})


def _dedupe(data):
    seen = set()
    keep = []
    for i in range(data.n_rows):
        parts = []
        for c in data.columns:
            v = data.col(c.name)[i]
            if c.kind == NUMERIC:
                parts.append(("nan",) if math.isnan(v) else ("f", float(v)))
            else:
                parts.append(("none",) if v is None else ("s", v))
        key = tuple(parts)
        if key not in seen:
            seen.add(key)
            keep.append(i)
    keep = np.asarray(keep, dtype=int)
    new_data = {c.name: data.col(c.name)[keep] for c in data.columns}
    return data.replace(data=new_data, log_entry={"op": "dedupe"})


def _fit_one_hot(data, name):
    if data.kind_of(name) != CATEGORICAL:
        raise SchemaError(f"one-hot encoding needs a categorical column, {name!r} is not")
    vocab = sorted({v for v in data.col(name) if v is not None})
    return _apply_one_hot(data, name, vocab)


def _apply_one_hot(data, name, vocab):
    col = data.col(name)
    new_cols = []
    new_data = {}
    for c in data.columns:
        if c.name == name:
            for cat in vocab:
                dummy = f"{name}={cat}"
                new_cols.append(Column(dummy, NUMERIC))
                new_data[dummy] = np.asarray([1.0 if v == cat else 0.0 for v in col],
                                             dtype=np.float64)
        else:
            new_cols.append(c)
    return data.replace(columns=new_cols, data=new_data,
                        log_entry={"op": "one_hot", "column": name, "vocabulary": list(vocab)})


def _fit_label(data, name):
    if data.kind_of(name) != CATEGORICAL:
        raise SchemaError(f"label encoding needs a categorical column, {name!r} is not")
    col = data.col(name)
    if any(v is None for v in col):
        raise ValidationError(f"label encoding of {name!r}: column has missing cells")
    return _apply_label(data, name, sorted(set(col)))


def _apply_label(data, name, vocab):
    index = {cat: i for i, cat in enumerate(vocab)}
    values = []
    for v in data.col(name):
        if v not in index:
            raise ValidationError(f"label encoding of {name!r}: unseen category {v!r}")
        values.append(float(index[v]))
    new_cols = [Column(name, NUMERIC) if c.name == name else c for c in data.columns]
    return data.replace(columns=new_cols,
                        data={name: np.asarray(values, dtype=np.float64)},
                        log_entry={"op": "label", "column": name, "vocabulary": list(vocab)})


def _fit_scale(data, name, how):
    _require_numeric(data, name)
    col = data.col(name)
    if np.isnan(col).any():
        raise ValidationError(f"scaling of {name!r}: column has missing cells")
    if how == "min_max":
        return _apply_min_max(data, name, float(col.min()), float(col.max()))
    stdev = float(col.std())  # population stdev
    if stdev == 0.0:
        raise ValidationError(f"z_score of {name!r}: zero-variance column")
    return _apply_z_score(data, name, float(col.mean()), stdev)


def _apply_min_max(data, name, lo, hi):
    _require_numeric(data, name)
    col = data.col(name)
    scaled = np.zeros_like(col) if hi == lo else (col - lo) / (hi - lo)
    return data.replace(data={name: scaled},
                        log_entry={"op": "min_max", "column": name, "min": lo, "max": hi})


def _apply_z_score(data, name, mean, stdev):
    _require_numeric(data, name)
    scaled = (data.col(name) - mean) / stdev
    return data.replace(data={name: scaled},
                        log_entry={"op": "z_score", "column": name, "mean": mean, "stdev": stdev})


def _poly_squares(data, names):
    new_cols = list(data.columns)
    new_data = {}
    for name in names:
        _require_numeric(data, name)
        sq = f"{name}^2"
        if sq in data.column_names:
            raise SchemaError(f"column {sq!r} already exists")
        new_cols.append(Column(sq, NUMERIC))
        new_data[sq] = data.col(name) ** 2
    return data.replace(columns=new_cols, data=new_data,
                        log_entry={"op": "poly_squares", "columns": list(names)})


def _interactions(data, names):
    new_cols = list(data.columns)
    new_data = {}
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            a, b = names[i], names[j]
            _require_numeric(data, a)
            _require_numeric(data, b)
            prod = f"{a}*{b}"
            if prod in data.column_names:
                raise SchemaError(f"column {prod!r} already exists")
            new_cols.append(Column(prod, NUMERIC))
            new_data[prod] = data.col(a) * data.col(b)
    return data.replace(columns=new_cols, data=new_data,
                        log_entry={"op": "interactions", "columns": list(names)})


def _derived_ratio(data, new_name, num, den):
    _require_numeric(data, num)
    _require_numeric(data, den)
    if new_name in data.column_names:
        raise SchemaError(f"column {new_name!r} already exists")
    d = data.col(den)
    bad = np.flatnonzero(~(d > 0))
    if bad.size:
        raise ValidationError(
            f"derived ratio {new_name!r}: non-positive denominator {den!r} "
            f"in rows {bad.tolist()[:20]}")
    new_cols = list(data.columns) + [Column(new_name, NUMERIC)]
    return data.replace(columns=new_cols, data={new_name: data.col(num) / d},
                        log_entry={"op": "derived", "name": new_name,
                                   "numerator": num, "denominator": den})

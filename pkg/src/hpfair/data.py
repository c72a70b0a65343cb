"""Tabular datasets with protected-group and favorable-outcome annotations.

A :class:`Dataset` carries an integer/float feature matrix, binary labels, the
protected-group index of each row and the label value regarded as favorable.
CSV files are read through a small JSON schema::

    {
      "label": "income",
      "favorable": ">50K",
      "protected": "sex",
      "groups": ["Male", "Female"],
      "group_map": {"Male": "Male", "*": "Female"},
      "columns": {"age": "numeric", "workclass": "categorical", "sex": "categorical"},
      "na_values": ["", "?"]
    }

``groups`` fixes the group ordering (group 0 first) and ``group_map`` folds raw
protected values into group names, ``"*"`` acting as the catch-all. Feature
columns are exactly the keys of ``columns`` minus the label column.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import (
    LabelError,
    ParseError,
    SchemaError,
    SizeError,
    StratificationError,
)

logger = logging.getLogger(__name__)

TRAIN_FRACTION = 0.75
MAX_SPLIT_ATTEMPTS = 100
COLUMN_KINDS = ("numeric", "categorical")
DEFAULT_NA_VALUES = ("", "?", "NA", "NaN")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable labeled table.

    Attributes
    ----------
    X : ndarray of shape (n_rows, n_features)
        Numeric features; categorical columns hold dense integer codes.
    y : ndarray of shape (n_rows,)
        Binary labels in {0, 1}.
    protected : ndarray of shape (n_rows,)
        Group index in ``[0, len(group_names))`` for every row.
    feature_names, group_names : list of str
    favorable_label : int
        Label value for which the favorable-outcome predicate holds.
    categories : dict
        Category table per categorical feature, code ``i`` maps to
        ``categories[name][i]``.
    """

    X: np.ndarray
    y: np.ndarray
    protected: np.ndarray
    feature_names: list
    group_names: list
    favorable_label: int = 1
    categories: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise SizeError(f"feature matrix must be 2-D, got shape {X.shape}")
        y = np.asarray(self.y, dtype=np.int64).ravel()
        protected = np.asarray(self.protected, dtype=np.int64).ravel()
        n = X.shape[0]
        if y.shape[0] != n or protected.shape[0] != n:
            raise SizeError("X, y and protected must have the same number of rows")
        if len(self.feature_names) != X.shape[1]:
            raise SchemaError("feature_names length does not match the feature count")
        if len(self.group_names) < 2:
            raise SchemaError("at least two protected groups are required")
        if n and (protected.min() < 0 or protected.max() >= len(self.group_names)):
            raise SchemaError("protected index outside the declared groups")
        if n and not np.isin(y, (0, 1)).all():
            raise LabelError("labels must be 0 or 1")
        if self.favorable_label not in (0, 1):
            raise LabelError("favorable_label must be 0 or 1")
        for arr in (X, y, protected):
            arr.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "protected", protected)
        object.__setattr__(self, "feature_names", list(self.feature_names))
        object.__setattr__(self, "group_names", list(self.group_names))

    @property
    def n_rows(self):
        return self.X.shape[0]

    @property
    def n_features(self):
        return self.X.shape[1]

    @property
    def n_groups(self):
        return len(self.group_names)

    def __len__(self):
        return self.n_rows

    def subset(self, rows):
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(
            X=self.X[rows],
            y=self.y[rows],
            protected=self.protected[rows],
            feature_names=self.feature_names,
            group_names=self.group_names,
            favorable_label=self.favorable_label,
            categories=self.categories,
        )

    def decode(self, feature, codes):
        """Map integer codes of a categorical feature back to their strings."""
        table = self.categories[feature]
        return [table[int(c)] for c in np.asarray(codes).ravel()]


@dataclass(frozen=True, eq=False)
class DataSplit:
    train: Dataset
    validation: Dataset
    seed: int
    train_rows: np.ndarray
    validation_rows: np.ndarray


def load_schema(path):
    path = Path(path)
    try:
        schema = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise SchemaError(f"schema file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise SchemaError(f"schema {path} is not valid JSON: {exc}") from None
    _check_schema(schema)
    return schema


def _check_schema(schema):
    if not isinstance(schema, dict):
        raise SchemaError("schema must be a JSON object")
    for key in ("label", "favorable", "protected", "columns"):
        if key not in schema:
            raise SchemaError(f"schema is missing required key {key!r}")
    for name, kind in schema["columns"].items():
        if kind not in COLUMN_KINDS:
            raise SchemaError(f"column {name!r} has unknown kind {kind!r}")


def load_dataset(csv_path, schema):
    """Read a headered CSV file into a :class:`Dataset`.

    Parameters
    ----------
    csv_path : path-like
    schema : dict or path-like
        Parsed schema or the path of a JSON schema file.

    Rows holding a missing-value marker in any used column are dropped (and
    counted in the log); everything else must parse.
    """
    if not isinstance(schema, dict):
        schema = load_schema(schema)
    else:
        _check_schema(schema)
    na_values = set(schema.get("na_values", DEFAULT_NA_VALUES))

    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, skipinitialspace=True)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{csv_path} is empty") from None
        rows = [[cell.strip() for cell in row] for row in reader if row]

    label_col = schema["label"]
    protected_col = schema["protected"]
    feature_cols = [c for c in schema["columns"] if c != label_col]
    index = {}
    for name in [label_col, protected_col, *feature_cols]:
        if name not in header:
            raise SchemaError(f"column {name!r} named in schema is absent from {csv_path}")
        index[name] = header.index(name)

    used = sorted(set(index.values()))
    kept = []
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ParseError(
                f"row {lineno} has {len(row)} cells, header has {len(header)}", row=lineno
            )
        if any(row[i] in na_values for i in used):
            continue
        kept.append((lineno, row))
    if len(kept) < len(rows):
        logger.warning("dropped %d rows with missing values", len(rows) - len(kept))

    y, favorable_label = _encode_labels([r[index[label_col]] for _, r in kept], schema)
    protected, group_names = _encode_groups([r[index[protected_col]] for _, r in kept], schema)

    columns = []
    categories = {}
    for name in feature_cols:
        j = index[name]
        if schema["columns"][name] == "categorical":
            table = {}
            codes = [table.setdefault(r[j], len(table)) for _, r in kept]
            categories[name] = list(table)
            columns.append(np.asarray(codes, dtype=np.float64))
        else:
            values = np.empty(len(kept))
            for i, (lineno, r) in enumerate(kept):
                try:
                    values[i] = float(r[j])
                except ValueError:
                    raise ParseError(
                        f"cannot parse {r[j]!r} as a number (row {lineno}, column {name!r})",
                        row=lineno,
                        column=name,
                    ) from None
            columns.append(values)
    X = np.column_stack(columns) if columns else np.empty((len(kept), 0))
    return Dataset(
        X=X,
        y=y,
        protected=protected,
        feature_names=feature_cols,
        group_names=group_names,
        favorable_label=favorable_label,
        categories=categories,
    )


def _encode_labels(raw, schema):
    favorable = str(schema["favorable"]).strip()
    distinct = list(dict.fromkeys(raw))
    if set(distinct) <= {"0", "1"}:
        if favorable not in ("0", "1"):
            raise LabelError(f"favorable label {favorable!r} is not 0 or 1")
        return np.asarray([int(v) for v in raw], dtype=np.int64), int(favorable)
    if len(distinct) > 2:
        raise LabelError(
            f"label column {schema['label']!r} has {len(distinct)} distinct values, expected 2"
        )
    if favorable not in distinct:
        raise LabelError(f"favorable label {favorable!r} never occurs in the label column")
    return np.asarray([int(v == favorable) for v in raw], dtype=np.int64), 1


def _encode_groups(raw, schema):
    group_map = schema.get("group_map")
    if group_map:
        fallback = group_map.get("*")
        names = []
        for v in raw:
            g = group_map.get(v, fallback)
            if g is None:
                raise SchemaError(f"protected value {v!r} is not covered by group_map")
            names.append(g)
    else:
        names = list(raw)
    order = list(schema.get("groups") or dict.fromkeys(names))
    lookup = {g: i for i, g in enumerate(order)}
    try:
        protected = np.asarray([lookup[g] for g in names], dtype=np.int64)
    except KeyError as exc:
        raise SchemaError(f"protected group {exc.args[0]!r} is not listed in 'groups'") from None
    if len(order) < 2:
        raise SchemaError("the protected attribute must define at least two groups")
    return protected, order


def split_dataset(d, seed):
    """Shuffle and cut ``d`` into a 75% training and 25% validation part.

    The shuffle is redrawn (up to 100 times) until every protected group
    present in ``d`` appears on both sides.
    """
    n = d.n_rows
    if n < 4:
        raise SizeError(f"need at least 4 rows to split, got {n}")
    n_train = int(np.floor(TRAIN_FRACTION * n + 0.5))
    present = np.unique(d.protected)
    rng = np.random.default_rng(seed)
    for _ in range(MAX_SPLIT_ATTEMPTS):
        perm = rng.permutation(n)
        train_rows, val_rows = np.sort(perm[:n_train]), np.sort(perm[n_train:])
        if np.isin(present, d.protected[train_rows]).all() and np.isin(
            present, d.protected[val_rows]
        ).all():
            return DataSplit(
                train=d.subset(train_rows),
                validation=d.subset(val_rows),
                seed=seed,
                train_rows=train_rows,
                validation_rows=val_rows,
            )
    raise StratificationError(
        f"no shuffle in {MAX_SPLIT_ATTEMPTS} attempts put every group in both splits"
    )


def group_indices(d):
    """Row indices of each protected group, in group order."""
    return [np.flatnonzero(d.protected == g).tolist() for g in range(d.n_groups)]

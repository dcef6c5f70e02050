"""Datasets: CSV ingestion, rank coding of ordinal targets, folds, fixtures."""

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DataError,
    InsufficientDataError,
    InvalidDatasetError,
    LabelError,
    ParseError,
    SchemaError,
)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix with rank-coded ordinal labels.

    ``label_dictionary[r]`` is the original target value of rank ``r``.
    """
    features: np.ndarray
    labels: np.ndarray
    k_states: int
    feature_names: tuple
    label_dictionary: tuple

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "label_dictionary", tuple(self.label_dictionary))
        if self.k_states < 2:
            raise InvalidDatasetError(f"need at least 2 ordinal states, got {self.k_states}")
        if X.ndim != 2 or X.shape[0] != y.shape[0] or y.ndim != 1:
            raise InvalidDatasetError(f"features {X.shape} do not match labels {y.shape}")
        if len(self.feature_names) != X.shape[1]:
            raise InvalidDatasetError("feature_names length differs from the feature count")
        if len(self.label_dictionary) != self.k_states:
            raise InvalidDatasetError("label_dictionary length differs from k_states")
        if y.size and (y.min() < 0 or y.max() >= self.k_states):
            raise InvalidDatasetError(f"labels must lie in [0, {self.k_states - 1}]")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain non-finite values")

    def __len__(self):
        return self.labels.shape[0]

    def subset(self, idx):
        return Dataset(self.features[idx], self.labels[idx], self.k_states,
                       self.feature_names, self.label_dictionary)


def load_csv(path, target_column, explicit_order=None):
    """Read a headered comma-separated file into a :class:`Dataset`.

    Targets are ranked by ascending numeric value unless ``explicit_order``
    lists the states from lowest to highest.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise DataError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if target_column not in header:
            raise SchemaError(f"{path}: target column {target_column!r} not found")
        t = header.index(target_column)
        feature_cols = [j for j in range(len(header)) if j != t]
        raw_targets, rows = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: row {line_no} has {len(row)} fields, "
                                 f"expected {len(header)}", row=line_no)
            values = []
            for j in feature_cols:
                cell = row[j].strip()
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(f"{path}: non-numeric value {cell!r} at row {line_no}, "
                                     f"column {header[j]!r}", row=line_no, column=header[j]) from None
                if not math.isfinite(v):
                    raise ParseError(f"{path}: non-finite value {cell!r} at row {line_no}, "
                                     f"column {header[j]!r}", row=line_no, column=header[j])
                values.append(v)
            rows.append(values)
            raw_targets.append(row[t].strip())
    if not rows:
        raise DataError(f"{path}: no data rows")

    if explicit_order is not None:
        order = [str(v).strip() for v in explicit_order]
        if len(set(order)) != len(order):
            raise LabelError("explicit order contains duplicates")
        rank_of = {v: i for i, v in enumerate(order)}
        unseen = sorted(set(raw_targets) - set(rank_of))
        if unseen:
            raise LabelError(f"target values {unseen} are not in the explicit order")
        dictionary = order
        labels = [rank_of[v] for v in raw_targets]
    else:
        try:
            numeric = [float(v) for v in raw_targets]
        except ValueError:
            raise LabelError(f"target column {target_column!r} is not numeric; "
                             "pass an explicit order") from None
        distinct = sorted(set(numeric))
        rank_of = {v: i for i, v in enumerate(distinct)}
        labels = [rank_of[v] for v in numeric]
        dictionary = [int(v) if v.is_integer() else v for v in distinct]
    if len(dictionary) < 2:
        raise InvalidDatasetError(f"target column {target_column!r} has fewer than 2 states")

    return Dataset(np.array(rows, dtype=np.float64).reshape(len(rows), len(feature_cols)),
                   np.array(labels, dtype=np.int64), len(dictionary),
                   [header[j] for j in feature_cols], dictionary)


def write_csv(dataset, path, target_column="target"):
    """Inverse of :func:`load_csv` (floats written with ``repr``, exact)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(dataset.feature_names) + [target_column])
        for row, label in zip(dataset.features, dataset.labels):
            w.writerow([repr(float(v)) for v in row] + [dataset.label_dictionary[label]])


@dataclass(frozen=True, eq=False)
class FoldPlan:
    folds: tuple
    seed: int
    stratified: bool

    def __len__(self):
        return len(self.folds)

    def train_test(self, i):
        test = self.folds[i]
        train = np.sort(np.concatenate([f for j, f in enumerate(self.folds) if j != i]))
        return train, test

    def to_json(self):
        return json.dumps({"k": len(self.folds), "seed": self.seed,
                           "stratified": self.stratified,
                           "folds": [f.tolist() for f in self.folds]})


def kfold_split(labels, k, seed):
    """Assign sample indices to ``k`` folds of near-equal size.

    When every class has at least ``k`` members the split is stratified:
    indices are shuffled within each class, laid out class after class and
    dealt round-robin, so each fold gets its share of every class and fold
    sizes still differ by at most one. Otherwise a plain shuffle is dealt.
    """
    labels = np.asarray(labels)
    N = labels.shape[0]
    if k < 2:
        raise ValueError(f"need at least 2 folds, got {k}")
    if N < k:
        raise InsufficientDataError(f"{N} samples cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    classes, counts = np.unique(labels, return_counts=True)
    stratified = bool(np.all(counts >= k))
    if stratified:
        layout = np.concatenate([rng.permutation(np.flatnonzero(labels == c)) for c in classes])
    else:
        layout = rng.permutation(N)
    slot = np.arange(N) % k
    folds = tuple(np.sort(layout[slot == i]) for i in range(k))
    return FoldPlan(folds, int(seed), stratified)


def synthesize(n_samples, d_features, k_states, noise_std=0.0, seed=0):
    """Latent-variable ordinal data with equal-frequency classes.

    ``x ~ N(0, I)``, latent ``s = <w, x> + noise`` with a unit-norm ``w``
    drawn from the seed, and labels are the quantile bins of ``s``.
    """
    if n_samples < 1 or d_features < 1 or k_states < 2:
        raise ValueError("sizes must be positive and k_states >= 2")
    if noise_std < 0:
        raise ValueError("noise_std must be non-negative")
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(d_features)
    w /= np.linalg.norm(w)
    X = rng.standard_normal((n_samples, d_features))
    s = X @ w + noise_std * rng.standard_normal(n_samples)
    ranks = np.empty(n_samples, dtype=np.int64)
    ranks[np.argsort(s, kind="stable")] = np.arange(n_samples)
    labels = ranks * k_states // n_samples
    return Dataset(X, labels, k_states, [f"x{j}" for j in range(d_features)], list(range(k_states)))

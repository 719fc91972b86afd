"""Tabular datasets, standardization and tree-based feature binarization."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    EmptyDataset, MissingValue, NoLabels, NoSplittableFeature, ParseFailure,
    UnknownColumn,
)

NUMERIC, CATEGORICAL, BINARY = "numeric", "categorical", "binary"
KINDS = (NUMERIC, CATEGORICAL, BINARY)


@dataclass
class TabularDataset:
    """Rows x features. Categorical cells hold level indices into ``levels``."""

    feature_names: list[str]
    kinds: list[str]
    values: np.ndarray
    labels: Optional[np.ndarray] = None
    levels: dict[str, list[str]] = field(default_factory=dict)
    label_name: Optional[str] = None
    label_levels: Optional[list[str]] = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != len(self.feature_names):
            raise ValueError("values must be n_rows x n_features")
        if len(self.kinds) != len(self.feature_names):
            raise ValueError("one kind per feature")
        if self.labels is not None:
            self.labels = np.asarray(self.labels)
            if len(self.labels) != len(self.values):
                raise ValueError("labels length must equal n_rows")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    @property
    def has_class_labels(self) -> bool:
        return self.labels is not None and np.issubdtype(self.labels.dtype, np.integer)

    @property
    def num_classes(self) -> int:
        if self.label_levels is not None:
            return len(self.label_levels)
        return int(self.labels.max()) + 1

    def subset(self, rows) -> "TabularDataset":
        return TabularDataset(
            list(self.feature_names), list(self.kinds), self.values[rows],
            None if self.labels is None else self.labels[rows],
            self.levels, self.label_name, self.label_levels)

    def with_values(self, values) -> "TabularDataset":
        return TabularDataset(
            list(self.feature_names), list(self.kinds), values, self.labels,
            self.levels, self.label_name, self.label_levels)

    @classmethod
    def from_arrays(cls, X, y=None, feature_names=None, kinds=None):
        X = np.asarray(X, dtype=float)
        d = X.shape[1]
        names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(d)]
        return cls(names, list(kinds) if kinds else [NUMERIC] * d, X, y)


def _parse_number(text):
    v = float(text)
    if not math.isfinite(v):
        raise ValueError("non-finite")
    return v


def load_csv(path, schema: Optional[dict] = None, label: Optional[str] = None,
             *, no_label: bool = False) -> TabularDataset:
    """Read a header-first, comma-separated UTF-8 file.

    ``schema`` maps column names to ``numeric`` (the default), ``categorical``
    or ``binary``. ``label`` names the label column; when omitted the last
    column is the label unless ``no_label`` is set. Integer labels are class
    indices, other numbers are real targets, and strings become levels in
    order of first appearance.
    """
    schema = dict(schema or {})
    with open(Path(path), newline="", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise EmptyDataset(f"{path}: no header")
    header = [h.strip() for h in lines[0].split(",")]
    for name in schema:
        if name not in header:
            raise UnknownColumn(name)
    for name, kind in schema.items():
        if kind not in KINDS:
            raise ValueError(f"unknown feature kind {kind!r} for {name!r}")
    if no_label:
        label_idx = None
    elif label is None:
        label_idx = len(header) - 1
    elif label in header:
        label_idx = header.index(label)
    else:
        raise UnknownColumn(label)

    rows = []
    for r, line in enumerate(lines[1:], start=1):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != len(header):
            raise ParseFailure(r, header[min(len(cells), len(header)) - 1],
                               f"expected {len(header)} fields, got {len(cells)}")
        for c, cell in enumerate(cells):
            if '"' in cell:
                raise ParseFailure(r, header[c], "quoted fields are not supported")
            if not cell.strip():
                raise MissingValue(r, header[c])
        rows.append([c.strip() for c in cells])
    if not rows:
        raise EmptyDataset(f"{path}: no data rows")

    feat_cols = [j for j in range(len(header)) if j != label_idx]
    names = [header[j] for j in feat_cols]
    kinds = [schema.get(n, NUMERIC) for n in names]
    X = np.empty((len(rows), len(feat_cols)))
    levels = {}
    for k, (j, name, kind) in enumerate(zip(feat_cols, names, kinds)):
        if kind == CATEGORICAL:
            lv: dict[str, int] = {}
            for i, row in enumerate(rows):
                X[i, k] = lv.setdefault(row[j], len(lv))
            levels[name] = list(lv)
            continue
        for i, row in enumerate(rows):
            try:
                X[i, k] = _parse_number(row[j])
            except ValueError:
                raise ParseFailure(i + 1, name, f"not a number: {row[j]!r}") from None
            if kind == BINARY and X[i, k] not in (0.0, 1.0):
                raise ParseFailure(i + 1, name, "binary feature must be 0 or 1")

    labels = label_levels = label_name = None
    if label_idx is not None:
        label_name = header[label_idx]
        raw = [row[label_idx] for row in rows]
        labels, label_levels = _parse_labels(raw)
    return TabularDataset(names, kinds, X, labels, levels, label_name, label_levels)


def _parse_labels(raw: Sequence[str]):
    try:
        ints = [int(v) for v in raw]
    except ValueError:
        pass
    else:
        if min(ints) < 0:
            return np.array(ints, dtype=float), None
        return np.array(ints, dtype=np.int64), None
    try:
        return np.array([_parse_number(v) for v in raw]), None
    except ValueError:
        pass
    lv: dict[str, int] = {}
    idx = [lv.setdefault(v, len(lv)) for v in raw]
    return np.array(idx, dtype=np.int64), list(lv)


# -- standardization ---------------------------------------------------------

@dataclass
class Scaler:
    """Affine map applied to numeric columns only; other columns pass through."""

    mean: np.ndarray
    scale: np.ndarray

    def transform(self, X):
        return (np.asarray(X, dtype=float) - self.mean) / self.scale

    def inverse(self, Z):
        return np.asarray(Z, dtype=float) * self.scale + self.mean

    def to_dict(self):
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, doc):
        return cls(np.asarray(doc["mean"], dtype=float), np.asarray(doc["scale"], dtype=float))


def standardize(dataset: TabularDataset) -> tuple[Scaler, TabularDataset]:
    """Zero mean, unit population standard deviation for numeric features.

    Constant columns map to 0 and record a scale of 1.
    """
    X = dataset.values
    d = X.shape[1]
    mean = np.zeros(d)
    scale = np.ones(d)
    for j, kind in enumerate(dataset.kinds):
        if kind != NUMERIC:
            continue
        col = X[:, j]
        if np.ptp(col) == 0:
            # mean() of identical floats can be off by an ulp, leaving a
            # ~1e-13 std that would blow the column up to +-1
            mean[j] = col[0]
            continue
        mean[j] = col.mean()
        sd = col.std()              # can underflow to 0 for subnormal spreads
        scale[j] = sd if sd > 0 else 1.0
    scaler = Scaler(mean, scale)
    return scaler, dataset.with_values(scaler.transform(X))


# -- literals and binarization ------------------------------------------------

LE, GT, EQ, NE = "<=", ">", "==", "!="
_OPPOSITE = {LE: GT, GT: LE, EQ: NE, NE: EQ}
# relations whose literal reads as "feature present / large"
POSITIVE_RELATIONS = frozenset({GT, EQ})


@dataclass(frozen=True)
class Literal:
    feature: str
    relation: str
    value: object

    def __str__(self):
        v = self.value
        if isinstance(v, float):
            v = f"{v:.6g}"
        return f"{self.feature} {self.relation} {v}"


class LiteralCatalog:
    """Indexed list of literals with optional complement links."""

    def __init__(self, literals: Sequence[Literal], complements: Optional[Sequence[int]] = None):
        self.literals = list(literals)
        if complements is None:
            complements = [-1] * len(self.literals)
        self.complements = np.asarray(complements, dtype=np.int64)

    def __len__(self):
        return len(self.literals)

    def __getitem__(self, i) -> Literal:
        return self.literals[i]

    def names(self) -> list[str]:
        return [str(l) for l in self.literals]

    def complement(self, i: int) -> int:
        return int(self.complements[i])

    @property
    def has_complements(self) -> bool:
        return bool(len(self)) and bool(np.all(self.complements >= 0))

    def is_positive(self, i: int) -> bool:
        lit = self.literals[i]
        if lit.relation == EQ and lit.value in (0, 0.0) and self.complement(i) >= 0:
            other = self.literals[self.complement(i)]
            return not (other.relation == EQ and other.value in (1, 1.0))
        return lit.relation in POSITIVE_RELATIONS

    @classmethod
    def from_columns(cls, names: Sequence[str]) -> "LiteralCatalog":
        """Catalog for an already binarized matrix: column j reads ``name == 1``."""
        return cls([Literal(n, EQ, 1) for n in names])

    @classmethod
    def with_negations(cls, names: Sequence[str]) -> "LiteralCatalog":
        """Catalog for ``[B, 1 - B]``: each column followed by its negation block."""
        d = len(names)
        lits = [Literal(n, EQ, 1) for n in names] + [Literal(n, EQ, 0) for n in names]
        comps = list(range(d, 2 * d)) + list(range(d))
        return cls(lits, comps)


def _gini_split_candidates(x, y, w, depth, num_classes):
    """All splits of a depth-bounded weighted Gini tree on one feature.

    Returns ``(threshold, weighted impurity decrease)`` pairs; the decrease is
    scaled by the node's share of total weight so values are comparable
    across depths.
    """
    total = w.sum()
    found = []

    def grow(idx, level):
        if level >= depth or len(idx) < 2:
            return
        best = _best_threshold(x[idx], y[idx], w[idx], num_classes)
        if best is None:
            return
        t, gain = best
        found.append((t, gain * w[idx].sum() / total))
        left = idx[x[idx] <= t]
        right = idx[x[idx] > t]
        grow(left, level + 1)
        grow(right, level + 1)

    grow(np.arange(len(x)), 0)
    return found


def _gini(counts):
    tot = counts.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(tot > 0, counts / tot, 0.0)
    return 1.0 - (p * p).sum(axis=-1)


def _best_threshold(x, y, w, num_classes, rel_tol=1e-12):
    """Best midpoint split on one feature by weighted Gini decrease.

    Ties (within ``rel_tol``) go to the smaller threshold. Returns ``None``
    when no split has positive decrease.
    """
    order = np.argsort(x, kind="stable")
    xs, ys, ws = x[order], y[order], w[order]
    onehot = np.zeros((len(xs), num_classes))
    onehot[np.arange(len(xs)), ys] = ws
    left = np.cumsum(onehot, axis=0)[:-1]
    total = onehot.sum(axis=0)
    right = total - left
    boundary = xs[1:] > xs[:-1]
    if not boundary.any():
        return None
    wl, wr, W = left.sum(1), right.sum(1), total.sum()
    valid = boundary & (wl > 0) & (wr > 0)
    if not valid.any():
        return None
    parent = _gini(total)
    gain = parent - (wl * _gini(left) + wr * _gini(right)) / W
    gain = np.where(valid, gain, -np.inf)
    top = gain.max()
    if not top > rel_tol * max(parent, 1e-300):
        return None
    k = int(np.flatnonzero(gain >= top - rel_tol * max(abs(top), 1e-300))[0])
    return 0.5 * (xs[k] + xs[k + 1]), float(gain[k])


class Binarizer:
    """Maps a dataset to 0/1 literal columns.

    Numeric features get threshold pairs ``x <= t`` / ``x > t``, binary
    features ``x == 0`` / ``x == 1`` and categorical features ``x == level`` /
    ``x != level`` for every observed level.
    """

    def __init__(self, feature_names, kinds, thresholds, levels, catalog: LiteralCatalog,
                 columns):
        self.feature_names = list(feature_names)
        self.kinds = list(kinds)
        self.thresholds = thresholds
        self.levels = levels
        self.catalog = catalog
        self._columns = columns      # per literal: (feature index, relation, numeric value)

    def transform(self, X) -> np.ndarray:
        if isinstance(X, TabularDataset):
            X = X.values
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty((X.shape[0], len(self._columns)), dtype=np.uint8)
        for k, (j, rel, v) in enumerate(self._columns):
            col = X[:, j]
            if rel == LE:
                out[:, k] = col <= v
            elif rel == GT:
                out[:, k] = col > v
            elif rel == EQ:
                out[:, k] = col == v
            else:
                out[:, k] = col != v
        return out

    @classmethod
    def build(cls, feature_names, kinds, thresholds, levels) -> "Binarizer":
        """``levels`` maps categorical features to ``[(level name, code), ...]``."""
        lits, cols, comps = [], [], []
        for j, (name, kind) in enumerate(zip(feature_names, kinds)):
            base = len(lits)
            if kind == NUMERIC:
                for t in thresholds.get(name, []):
                    t = float(t)
                    lits += [Literal(name, LE, t), Literal(name, GT, t)]
                    cols += [(j, LE, t), (j, GT, t)]
            elif kind == BINARY:
                lits += [Literal(name, EQ, 0), Literal(name, EQ, 1)]
                cols += [(j, EQ, 0.0), (j, EQ, 1.0)]
            else:
                for lvl, code in levels.get(name, []):
                    lits += [Literal(name, EQ, lvl), Literal(name, NE, lvl)]
                    cols += [(j, EQ, float(code)), (j, NE, float(code))]
            for k in range(base, len(lits), 2):
                comps += [k + 1, k]
        return cls(feature_names, kinds, thresholds, levels, LiteralCatalog(lits, comps), cols)

    def to_dict(self):
        return {
            "feature_names": self.feature_names, "kinds": self.kinds,
            "thresholds": {k: [float(t) for t in v] for k, v in self.thresholds.items()},
            "levels": {k: [[str(a), int(b)] for a, b in v] for k, v in self.levels.items()},
        }

    @classmethod
    def from_dict(cls, doc):
        return cls.build(doc["feature_names"], doc["kinds"],
                         {k: list(v) for k, v in doc["thresholds"].items()},
                         {k: [(a, int(b)) for a, b in v] for k, v in doc.get("levels", {}).items()})


def tree_thresholds(x, y, max_thresholds: int, tree_depth: int = 2,
                    num_classes: Optional[int] = None) -> list[float]:
    """Top thresholds of a depth-bounded Gini tree fit on one feature.

    Thresholds are ranked by weighted impurity decrease (ties: smaller
    threshold first), truncated to ``max_thresholds`` and returned sorted.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    C = num_classes or int(y.max()) + 1
    cands = _gini_split_candidates(x, y, np.ones(len(x)), tree_depth, C)
    ranked = sorted(cands, key=lambda tg: (-tg[1], tg[0]))
    return sorted(t for t, _ in ranked[:max_thresholds])


def binarize_from_trees(dataset: TabularDataset, max_thresholds_per_feature: int = 4,
                        tree_depth: int = 2, seed: int = 0):
    """Pick split thresholds per numeric feature from small Gini trees.

    ``seed`` is accepted for interface uniformity; the procedure is
    deterministic.

    Returns:
        (Binarizer, 0/1 matrix of shape ``(n_rows, n_literals)``)
    """
    del seed
    if dataset.labels is None:
        raise NoLabels("binarization needs class labels")
    y = np.asarray(dataset.labels)
    if not np.issubdtype(y.dtype, np.integer):
        raise NoLabels("binarization needs class labels, got real targets")
    X = dataset.values
    if not any(np.unique(X[:, j]).size > 1 for j in range(X.shape[1])):
        raise NoSplittableFeature("every feature is constant")
    C = int(y.max()) + 1
    thresholds, levels = {}, {}
    for j, (name, kind) in enumerate(zip(dataset.feature_names, dataset.kinds)):
        if kind == NUMERIC:
            thresholds[name] = tree_thresholds(X[:, j], y, max_thresholds_per_feature,
                                               tree_depth, C)
        elif kind == CATEGORICAL:
            names = dataset.levels.get(name)
            levels[name] = [(names[c] if names else str(c), c)
                            for c in sorted(set(X[:, j].astype(int).tolist()))]
    binz = Binarizer.build(dataset.feature_names, dataset.kinds, thresholds, levels)
    return binz, binz.transform(X)


"""Mutual-information feature ranking and cross-validated top-n selection."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from sklearn.model_selection import StratifiedKFold

from . import classifier

DEFAULT_BINS = 10


class StratificationError(ValueError):
    pass


class BinReductionWarning(UserWarning):
    pass


class ColumnMeta(NamedTuple):
    band_index: int
    source_index: int
    source_kind: str  # "csp_filter" or "channel"


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    labels: np.ndarray
    column_meta: tuple = field(default=())

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        labels = np.asarray(self.labels)
        if values.ndim != 2:
            raise ValueError("values must be (trials, features)")
        if labels.shape != (values.shape[0],):
            raise ValueError(f"{labels.shape[0]} labels for {values.shape[0]} trials")
        if not np.all(np.isfinite(values)):
            raise ValueError("feature values must be finite")
        meta = tuple(ColumnMeta(*m) for m in self.column_meta)
        if meta and len(meta) != values.shape[1]:
            raise ValueError(f"{len(meta)} column descriptors for {values.shape[1]} columns")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "column_meta", meta)

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def subset(self, rows=None, cols=None) -> "FeatureMatrix":
        rows = slice(None) if rows is None else rows
        values = self.values[rows]
        meta = self.column_meta
        if cols is not None:
            values = values[:, cols]
            meta = tuple(meta[c] for c in cols) if meta else ()
        return FeatureMatrix(values, self.labels[rows], meta)


@dataclass(frozen=True)
class Ranking:
    order: np.ndarray
    scores: np.ndarray


@dataclass(frozen=True)
class SelectionResult:
    n: int
    selected: list
    cv_curve: list  # [(n, mean_accuracy, std_accuracy), ...]
    ranking: Ranking
    folds: int
    seed: int
    fold_splits: list = field(default_factory=list, repr=False)
    fold_rankings: list = field(default_factory=list, repr=False)


def equal_frequency_bins(x: np.ndarray, bins: int) -> np.ndarray:
    """Bin index from the rank of each value; tied values share a bin."""
    x = np.asarray(x, dtype=float)
    below = np.searchsorted(np.sort(x), x, side="left")
    return (below * bins) // x.size


def _mi_from_codes(a: np.ndarray, b: np.ndarray) -> float:
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    joint = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(joint, (ai, bi), 1.0)
    joint /= joint.sum()
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log2(joint[nz] / (pa @ pb)[nz])))
    return max(mi, 0.0)


def _effective_bins(t: int, bins: int) -> int:
    if t < 2 * bins:
        reduced = max(1, t // 2)
        warnings.warn(f"{t} samples for {bins} bins; using {reduced} bins",
                      BinReductionWarning, stacklevel=3)
        return reduced
    return bins


def mutual_information(feature, labels, bins: int = DEFAULT_BINS) -> float:
    """Plug-in MI in bits between an equal-frequency binned feature and the labels."""
    feature = np.asarray(feature, dtype=float)
    labels = np.asarray(labels)
    if feature.shape != labels.shape or feature.ndim != 1:
        raise ValueError("feature and labels must be equal-length vectors")
    if np.unique(labels).size < 2:
        raise ValueError("mutual information needs at least two distinct labels")
    bins = _effective_bins(feature.size, bins)
    return _mi_from_codes(equal_frequency_bins(feature, bins), labels)


def rank_features(fm: FeatureMatrix, bins: int = DEFAULT_BINS) -> Ranking:
    """Columns ordered by MI descending, ties to the lower column index."""
    if np.unique(fm.labels).size < 2:
        raise ValueError("ranking needs at least two distinct labels")
    bins = _effective_bins(fm.values.shape[0], bins)
    scores = np.array([_mi_from_codes(equal_frequency_bins(col, bins), fm.labels)
                       for col in fm.values.T])
    order = np.lexsort((np.arange(scores.size), -scores))
    return Ranking(order, scores)


def _accuracy_curve(train: FeatureMatrix, val: FeatureMatrix, order, ns) -> np.ndarray:
    acc = np.empty(len(ns))
    for i, n in enumerate(ns):
        cols = order[:n]
        model = classifier.fit(train.values[:, cols], train.labels)
        acc[i] = np.mean(model.predict(val.values[:, cols]) == val.labels)
    return acc


def select_top_n_cv(fm: FeatureMatrix, folds: int = 10,
                    candidate_ns: Sequence[int] | None = None, seed: int = 0,
                    bins: int = DEFAULT_BINS) -> SelectionResult:
    """Choose how many top-ranked features to keep by stratified k-fold CV.

    Ranking is recomputed on each fold's training part. The ``n`` with the
    highest mean validation accuracy wins, smaller ``n`` on ties; the
    returned columns come from a ranking on all of ``fm``.
    """
    F = fm.n_features
    ns = list(range(1, F + 1)) if candidate_ns is None else sorted(set(int(n) for n in candidate_ns))
    if not ns or ns[0] < 1 or ns[-1] > F:
        raise ValueError(f"candidate n values must lie in 1..{F}")
    if folds < 2:
        raise ValueError("need at least 2 folds")
    classes, counts = np.unique(fm.labels, return_counts=True)
    if classes.size < 2:
        raise StratificationError("only one class present")
    if counts.min() < folds:
        raise StratificationError(
            f"class {classes[np.argmin(counts)]} has {counts.min()} trials for {folds} folds")

    skf = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    scores = np.empty((folds, len(ns)))
    splits, fold_rankings = [], []
    for k, (tr, va) in enumerate(skf.split(fm.values, fm.labels)):
        train, val = fm.subset(tr), fm.subset(va)
        if np.unique(train.labels).size < 2 or np.unique(val.labels).size < classes.size:
            raise StratificationError(f"fold {k} is missing a class")
        order = rank_features(train, bins).order
        scores[k] = _accuracy_curve(train, val, order, ns)
        splits.append((tr, va))
        fold_rankings.append(order)

    mean = scores.mean(axis=0)
    std = scores.std(axis=0)
    best = int(np.argmax(mean))  # first maximum = smallest n
    ranking = rank_features(fm, bins)
    n = ns[best]
    return SelectionResult(
        n=n,
        selected=[int(c) for c in ranking.order[:n]],
        cv_curve=[(int(a), float(b), float(c)) for a, b, c in zip(ns, mean, std)],
        ranking=ranking,
        folds=folds,
        seed=seed,
        fold_splits=splits,
        fold_rankings=fold_rankings,
    )

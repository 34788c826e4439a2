"""KNN classification with Euclidean distance and stratified evaluation.

Tie handling is fully deterministic: distance ties at the neighbour boundary
are broken by training-row order, vote ties by the tied class whose nearest
selected member is closest, then by lexicographic label order. Features are
z-scored with training statistics by default because the feature sets mix
scales (Hz vs dimensionless); raw distances remain available via
``standardize=False`` and every result records which mode was used.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "Dataset",
    "ConfusionMatrix",
    "CvResult",
    "Standardizer",
    "knn_predict",
    "stratified_folds",
    "cross_validate",
    "holdout_evaluate",
    "split_by_velocity",
]


@dataclass(frozen=True)
class Dataset:
    """Labeled feature rows with per-row velocity and trial metadata."""

    features: np.ndarray
    labels: tuple[str, ...]
    velocities: tuple[float, ...]
    trials: tuple[int, ...]
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "velocities", tuple(self.velocities))
        object.__setattr__(self, "trials", tuple(self.trials))
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if feats.ndim != 2 or feats.shape[1] < 1:
            raise ValueError("features must be a [rows x dims] matrix")
        if not np.isfinite(feats).all():
            raise ValueError("features must be finite")
        n = feats.shape[0]
        if not (len(self.labels) == len(self.velocities) == len(self.trials) == n):
            raise ValueError("metadata length must match feature rows")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def label_set(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.labels)))

    def subset(self, indices: Sequence[int]) -> "Dataset":
        idx = list(indices)
        return Dataset(
            features=self.features[idx],
            labels=[self.labels[i] for i in idx],
            velocities=[self.velocities[i] for i in idx],
            trials=[self.trials[i] for i in idx],
            feature_names=self.feature_names,
        )


@dataclass(frozen=True)
class ConfusionMatrix:
    """True-by-predicted integer counts with a fixed label order."""

    counts: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "labels", tuple(self.labels))
        n = len(self.labels)
        if counts.shape != (n, n):
            raise ValueError("counts must be [labels x labels]")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        total = self.total
        if total == 0:
            return 0.0
        return float(np.trace(self.counts) / total)


@dataclass(frozen=True)
class CvResult:
    accuracy: float
    confusion: ConfusionMatrix
    per_fold: tuple[float, ...]
    standardized: bool


@dataclass(frozen=True)
class Standardizer:
    """Per-feature z-scoring statistics fitted on training rows only."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, features: np.ndarray) -> "Standardizer":
        mean = features.mean(axis=0)
        scale = features.std(axis=0)
        scale = np.where(scale == 0, 1.0, scale)  # constant feature: leave centered
        return cls(mean=mean, scale=scale)

    def apply(self, features: np.ndarray) -> np.ndarray:
        return (features - self.mean) / self.scale


def _knn_predict_rows(
    train_feats: np.ndarray,
    train_labels: Sequence[str],
    query: np.ndarray,
    k: int,
) -> str:
    dists = np.sqrt(((train_feats - query) ** 2).sum(axis=1))
    order = np.argsort(dists, kind="stable")[:k]
    votes: dict[str, int] = {}
    nearest: dict[str, float] = {}
    for idx in order:
        lab = train_labels[idx]
        votes[lab] = votes.get(lab, 0) + 1
        d = float(dists[idx])
        if lab not in nearest or d < nearest[lab]:
            nearest[lab] = d
    best_votes = max(votes.values())
    tied = [lab for lab, v in votes.items() if v == best_votes]
    if len(tied) == 1:
        return tied[0]
    # vote tie: closest nearest-member wins, then lexicographic label order
    return min(tied, key=lambda lab: (nearest[lab], lab))


def knn_predict(train: Dataset, query: Sequence[float], k: int) -> str:
    """Majority label among the k nearest training rows by Euclidean distance."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if len(train) == 0:
        raise ValueError("training set must be non-empty")
    if k > len(train):
        raise ValueError(f"k={k} exceeds training size {len(train)}")
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (train.features.shape[1],):
        raise ValueError("query dimension does not match training features")
    return _knn_predict_rows(train.features, train.labels, query, k)


def stratified_folds(
    labels: Sequence[str], folds: int, seed
) -> list[np.ndarray]:
    """Assign rows to folds, per-label shuffled round-robin from the seed.

    Per-fold per-label counts differ by at most one. Labels are processed in
    sorted order so the assignment depends only on (labels, folds, seed).
    """
    if folds < 2:
        raise ValueError("folds must be at least 2")
    labels = list(labels)
    rng = np.random.default_rng(seed)
    assignments: list[list[int]] = [[] for _ in range(folds)]
    by_label: dict[str, list[int]] = {}
    for i, lab in enumerate(labels):
        by_label.setdefault(lab, []).append(i)
    for lab in sorted(by_label):
        rows = np.asarray(by_label[lab])
        if rows.size < folds:
            raise ValueError(
                f"label {lab!r} has {rows.size} rows, fewer than {folds} folds"
            )
        shuffled = rows[rng.permutation(rows.size)]
        for pos, row in enumerate(shuffled):
            assignments[pos % folds].append(int(row))
    return [np.asarray(sorted(fold), dtype=np.int64) for fold in assignments]


def _evaluate_split(
    train: Dataset,
    test: Dataset,
    k: int,
    standardize: bool,
    label_order: Sequence[str],
) -> np.ndarray:
    """Confusion counts for one train/test split (shared by CV and holdout)."""
    train_feats = train.features
    test_feats = test.features
    if standardize:
        scaler = Standardizer.fit(train_feats)
        train_feats = scaler.apply(train_feats)
        test_feats = scaler.apply(test_feats)
    index = {lab: i for i, lab in enumerate(label_order)}
    counts = np.zeros((len(label_order), len(label_order)), dtype=np.int64)
    for row, true_lab in zip(test_feats, test.labels):
        pred = _knn_predict_rows(train_feats, train.labels, row, k)
        counts[index[true_lab], index[pred]] += 1
    return counts


def cross_validate(
    data: Dataset,
    k_neighbors: int = 5,
    folds: int = 5,
    seed=0,
    standardize: bool = True,
) -> CvResult:
    """Stratified k-fold cross-validation; aggregate confusion over folds.

    Standardization statistics are fitted on each fold's training rows only.
    Identical (data, seed) always reproduces identical folds and results.
    """
    fold_sets = stratified_folds(data.labels, folds, seed)
    label_order = data.label_set
    total = np.zeros((len(label_order), len(label_order)), dtype=np.int64)
    per_fold = []
    all_idx = np.arange(len(data))
    for fold in fold_sets:
        mask = np.ones(len(data), dtype=bool)
        mask[fold] = False
        train = data.subset(all_idx[mask])
        test = data.subset(fold)
        counts = _evaluate_split(train, test, k_neighbors, standardize, label_order)
        per_fold.append(float(np.trace(counts) / counts.sum()))
        total += counts
    confusion = ConfusionMatrix(counts=total, labels=label_order)
    return CvResult(
        accuracy=confusion.accuracy,
        confusion=confusion,
        per_fold=tuple(per_fold),
        standardized=standardize,
    )


def holdout_evaluate(
    train: Dataset,
    test: Dataset,
    k_neighbors: int = 5,
    standardize: bool = True,
) -> CvResult:
    """Evaluate a fixed train/test split (no cross-validation)."""
    label_order = tuple(sorted(set(train.labels) | set(test.labels)))
    counts = _evaluate_split(train, test, k_neighbors, standardize, label_order)
    confusion = ConfusionMatrix(counts=counts, labels=label_order)
    return CvResult(
        accuracy=confusion.accuracy,
        confusion=confusion,
        per_fold=(confusion.accuracy,),
        standardized=standardize,
    )


def split_by_velocity(data: Dataset, test_velocity: float) -> tuple[Dataset, Dataset]:
    """Exact partition into (train, test) by sliding velocity."""
    velocities = np.asarray(data.velocities)
    test_mask = velocities == test_velocity
    if not test_mask.any():
        raise ValueError(f"test velocity {test_velocity} not present in dataset")
    if len(set(velocities[~test_mask])) < 2:
        raise ValueError("need at least two distinct training velocities")
    idx = np.arange(len(data))
    return data.subset(idx[~test_mask]), data.subset(idx[test_mask])

"""K-nearest-neighbor classification with leave-one-out evaluation.

Determinism rules, fixed so results never depend on platform or input
order: neighbors at equal distance are ranked by dataset index (stable
sort), and a tied vote falls back to the label of the single nearest
neighbor. Euclidean ranking uses squared distances (same ordering, no
square root).

Standardization scope is configurable: ``global`` fits the z-score on
the entire dataset before cross-validation (the conventional procedure
for this task, though it leaks test statistics into training), while
``per-fold`` re-fits on each training fold only. Both are exposed so the
leakage effect can be measured.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .audio_io import ClassLabel, parse_label
from .errors import ConfigError
from .features import FeatureVector, ZScoreScaler, as_feature_matrix

METRICS = ("euclidean", "manhattan")
ZSCORE_MODES = ("global", "per-fold")


@dataclass(frozen=True)
class KnnConfig:
    """Neighbor count and distance metric."""

    k: int = 1
    metric: str = "euclidean"

    def __post_init__(self):
        if not isinstance(self.k, int) or self.k < 1:
            raise ConfigError(f"k must be a positive integer, got {self.k!r}")
        if self.metric not in METRICS:
            raise ConfigError(f"metric must be one of {METRICS}, got {self.metric!r}")


@dataclass(frozen=True)
class PredictionRecord:
    """One evaluated entry: where it came from, truth, and prediction."""

    source: str
    truth: ClassLabel
    prediction: ClassLabel

    @property
    def correct(self) -> bool:
        return self.truth == self.prediction


@dataclass(frozen=True)
class EvalResult:
    """Accuracy, confusion counts, and per-entry predictions.

    Confusion counts treat normal as the negative class: ``true_normal``
    and ``false_abnormal`` partition the normal entries, ``false_normal``
    and ``true_abnormal`` partition the abnormal ones.
    """

    accuracy: float
    true_normal: int
    false_abnormal: int
    false_normal: int
    true_abnormal: int
    records: tuple[PredictionRecord, ...] = field(default=())

    def __post_init__(self):
        total = self.total
        if total > 0:
            correct = (self.true_normal + self.true_abnormal) / total
            if abs(correct - self.accuracy) > 1e-12:
                raise ValueError(
                    f"accuracy {self.accuracy} inconsistent with confusion counts "
                    f"({self.true_normal}+{self.true_abnormal})/{total}"
                )
        if self.records and len(self.records) != total:
            raise ValueError(
                f"{len(self.records)} records but confusion counts sum to {total}"
            )

    @property
    def total(self) -> int:
        return (self.true_normal + self.false_abnormal
                + self.false_normal + self.true_abnormal)

    @property
    def sensitivity(self) -> float | None:
        """Fraction of abnormal entries detected (None without abnormals)."""
        positives = self.true_abnormal + self.false_normal
        return self.true_abnormal / positives if positives else None

    @property
    def specificity(self) -> float | None:
        """Fraction of normal entries kept normal (None without normals)."""
        negatives = self.true_normal + self.false_abnormal
        return self.true_normal / negatives if negatives else None

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "confusion": {
                "true_normal": self.true_normal,
                "false_abnormal": self.false_abnormal,
                "false_normal": self.false_normal,
                "true_abnormal": self.true_abnormal,
            },
            "entries": [
                {"source": r.source, "truth": r.truth.value, "prediction": r.prediction.value}
                for r in self.records
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, payload: dict) -> "EvalResult":
        confusion = payload["confusion"]
        return cls(
            accuracy=payload["accuracy"],
            true_normal=confusion["true_normal"],
            false_abnormal=confusion["false_abnormal"],
            false_normal=confusion["false_normal"],
            true_abnormal=confusion["true_abnormal"],
            records=tuple(
                PredictionRecord(e["source"], parse_label(e["truth"]),
                                 parse_label(e["prediction"]))
                for e in payload.get("entries", [])
            ),
        )

    @classmethod
    def from_json(cls, text: str) -> "EvalResult":
        return cls.from_dict(json.loads(text))


def _distances(train: np.ndarray, query: np.ndarray, metric: str) -> np.ndarray:
    """Distance from query to every training row (squared for euclidean)."""
    delta = train - query
    if metric == "euclidean":
        return (delta * delta).sum(axis=-1)
    return np.abs(delta).sum(axis=-1)


def _vote(labels: Sequence[ClassLabel], neighbor_order: np.ndarray, k: int) -> ClassLabel:
    """Majority label of the first k neighbors; ties go to the nearest."""
    chosen = [labels[i] for i in neighbor_order[:k]]
    n_normal = sum(1 for lab in chosen if lab is ClassLabel.NORMAL)
    n_abnormal = k - n_normal
    if n_normal > n_abnormal:
        return ClassLabel.NORMAL
    if n_abnormal > n_normal:
        return ClassLabel.ABNORMAL
    return labels[neighbor_order[0]]


def knn_predict(train: Sequence[FeatureVector], query: FeatureVector,
                config: KnnConfig = KnnConfig()) -> ClassLabel:
    """Classify one query vector against labeled training vectors."""
    if not train:
        raise ValueError("training set is empty")
    if config.k > len(train):
        raise ConfigError(f"k={config.k} exceeds training set size {len(train)}")
    for v in train:
        if v.label is None:
            raise ValueError("training vectors must be labeled")
    X = as_feature_matrix(train)
    q = np.asarray(query.values, dtype=np.float64)
    if q.shape[0] != X.shape[1]:
        raise ValueError(f"query has {q.shape[0]} features, training set has {X.shape[1]}")
    order = np.argsort(_distances(X, q, config.metric), kind="stable")
    return _vote([v.label for v in train], order, config.k)


def _predictions_global(X: np.ndarray, labels: list[ClassLabel],
                        config: KnnConfig) -> list[ClassLabel]:
    """LOOCV predictions with one shared standardization (already applied)."""
    n = len(labels)
    out = []
    for i in range(n):
        row = _distances(X, X[i], config.metric)
        row[i] = np.inf  # exclude self; stable order of the rest preserved
        order = np.argsort(row, kind="stable")
        out.append(_vote(labels, order, config.k))
    return out


def _predictions_per_fold(raw: np.ndarray, labels: list[ClassLabel],
                          config: KnnConfig) -> list[ClassLabel]:
    """LOOCV predictions re-fitting the standardizer on each training fold."""
    n = len(labels)
    out = []
    for i in range(n):
        keep = np.arange(n) != i
        scaler = ZScoreScaler().fit(raw[keep])
        train = scaler.transform(raw[keep])
        query = scaler.transform(raw[i : i + 1])[0]
        order = np.argsort(_distances(train, query, config.metric), kind="stable")
        fold_labels = [labels[j] for j in range(n) if j != i]
        out.append(_vote(fold_labels, order, config.k))
    return out


def tally(truths: Sequence[ClassLabel], predictions: Sequence[ClassLabel],
          sources: Sequence[str]) -> EvalResult:
    """Aggregate per-entry predictions into an EvalResult."""
    counts = {
        (ClassLabel.NORMAL, ClassLabel.NORMAL): 0,
        (ClassLabel.NORMAL, ClassLabel.ABNORMAL): 0,
        (ClassLabel.ABNORMAL, ClassLabel.NORMAL): 0,
        (ClassLabel.ABNORMAL, ClassLabel.ABNORMAL): 0,
    }
    records = []
    for truth, prediction, source in zip(truths, predictions, sources):
        counts[(truth, prediction)] += 1
        records.append(PredictionRecord(source=source, truth=truth, prediction=prediction))
    total = len(records)
    correct = (counts[(ClassLabel.NORMAL, ClassLabel.NORMAL)]
               + counts[(ClassLabel.ABNORMAL, ClassLabel.ABNORMAL)])
    return EvalResult(
        accuracy=correct / total,
        true_normal=counts[(ClassLabel.NORMAL, ClassLabel.NORMAL)],
        false_abnormal=counts[(ClassLabel.NORMAL, ClassLabel.ABNORMAL)],
        false_normal=counts[(ClassLabel.ABNORMAL, ClassLabel.NORMAL)],
        true_abnormal=counts[(ClassLabel.ABNORMAL, ClassLabel.ABNORMAL)],
        records=tuple(records),
    )


def loocv_evaluate(dataset: Sequence[FeatureVector], config: KnnConfig = KnnConfig(),
                   zscore_mode: str = "global") -> EvalResult:
    """Leave-one-out evaluation of the whole dataset.

    In ``global`` mode the standardizer is fitted once on all vectors; in
    ``per-fold`` mode it is re-fitted on each n-1 training fold. Input
    vectors are expected raw (unstandardized).
    """
    if zscore_mode not in ZSCORE_MODES:
        raise ConfigError(f"zscore_mode must be one of {ZSCORE_MODES}, got {zscore_mode!r}")
    n = len(dataset)
    if n < 2:
        raise ValueError(f"leave-one-out needs at least 2 vectors, got {n}")
    if config.k > n - 1:
        raise ConfigError(f"k={config.k} exceeds fold size {n - 1}")
    labels = []
    for v in dataset:
        if v.label is None:
            raise ValueError("all vectors must be labeled for evaluation")
        labels.append(v.label)
    raw = as_feature_matrix(dataset)
    if zscore_mode == "global":
        scaler = ZScoreScaler().fit(raw)
        predictions = _predictions_global(scaler.transform(raw), labels, config)
    else:
        predictions = _predictions_per_fold(raw, labels, config)
    sources = [v.source or f"entry_{i:03d}" for i, v in enumerate(dataset)]
    return tally(labels, predictions, sources)


class KnnClassifier(BaseEstimator, ClassifierMixin):
    """Estimator wrapper over the plain-array KNN, for pipeline use.

    Labels may be anything hashable; the deterministic tie rules order
    equal distances by training index and break tied votes with the
    single nearest neighbor's label.
    """

    def __init__(self, k=1, metric="euclidean"):
        self.k = k
        self.metric = metric

    def fit(self, X, y):
        config = KnnConfig(k=self.k, metric=self.metric)  # validates params
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y)
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"{X.shape[0]} rows but {y.shape[0]} labels")
        if config.k > X.shape[0]:
            raise ConfigError(f"k={config.k} exceeds training set size {X.shape[0]}")
        self.X_ = X
        self.y_ = y
        self.classes_ = np.unique(y)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "X_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, fitted on {self.n_features_in_}"
            )
        out = []
        for q in X:
            order = np.argsort(_distances(self.X_, q, self.metric), kind="stable")
            chosen = self.y_[order[: self.k]]
            values, counts = np.unique(chosen, return_counts=True)
            winners = values[counts == counts.max()]
            if len(winners) == 1:
                out.append(winners[0])
            else:
                out.append(self.y_[order[0]])
        return np.asarray(out)

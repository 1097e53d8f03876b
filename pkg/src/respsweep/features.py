"""Statistical pooling of cepstral matrices and z-score standardization.

Each coefficient track is reduced to six statistics, giving a fixed
6 * num_coefficients feature vector per recording (84 with the default
14 coefficients). Moments are population moments (divisor n) and kurtosis
is Pearson's, non-excess; constant tracks report skewness 0 and
kurtosis 0 so degenerate recordings stay finite.

``ZScoreScaler``, ``MfccFeaturizer``, and ``classifier.KnnClassifier``
follow the scikit-learn estimator protocol, so the pipeline composes with
the wider ecosystem (``sklearn.pipeline.Pipeline``, grid search, etc.).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .audio_io import AudioClip, ClassLabel, WindowSpec, extract_window, parse_label
from .dsp import MfccConfig, MfccMatrix, compute_mfcc

STAT_NAMES = ("min", "max", "mean", "std", "skewness", "kurtosis")


@dataclass(frozen=True)
class FeatureVector:
    """Pooled statistics for one recording, plus its label and origin.

    ``values`` is coefficient-major: the six statistics of coefficient 0,
    then of coefficient 1, and so on, each in STAT_NAMES order.
    """

    values: np.ndarray
    label: ClassLabel | None = None
    source: str | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(values)):
            raise ValueError("feature values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)


def column_statistics(track: np.ndarray) -> np.ndarray:
    """The six pooled statistics of one coefficient track."""
    mean = track.mean()
    centered = track - mean
    m2 = np.mean(centered**2)
    std = np.sqrt(m2)
    if m2 == 0.0:
        skewness = 0.0
        kurtosis = 0.0
    else:
        skewness = np.mean(centered**3) / m2**1.5
        kurtosis = np.mean(centered**4) / m2**2
    return np.array([track.min(), track.max(), mean, std, skewness, kurtosis])


def summarize(matrix: MfccMatrix | np.ndarray, label: ClassLabel | None = None,
              source: str | None = None) -> FeatureVector:
    """Pool a frames-by-coefficients matrix into one FeatureVector."""
    coeffs = matrix.coefficients if isinstance(matrix, MfccMatrix) else np.asarray(matrix)
    if coeffs.ndim != 2 or coeffs.shape[0] < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {coeffs.shape}")
    values = np.concatenate([column_statistics(coeffs[:, c]) for c in range(coeffs.shape[1])])
    return FeatureVector(values=values, label=label, source=source)


def as_feature_matrix(vectors: Sequence[FeatureVector]) -> np.ndarray:
    """Stack FeatureVectors into an (n, d) array, checking equal lengths."""
    if not vectors:
        raise ValueError("no feature vectors given")
    width = len(vectors[0])
    for v in vectors:
        if len(v) != width:
            raise ValueError(f"feature length mismatch: {len(v)} vs {width}")
    return np.vstack([v.values for v in vectors])


class ZScoreScaler(BaseEstimator, TransformerMixin):
    """Per-column z-scoring with population (divisor-n) standard deviation.

    Columns whose fitted deviation is zero are flagged and transform to 0.

    Attributes
    ----------
    mean_ : per-column means of the fit set
    std_ : per-column population standard deviations
    zero_variance_ : boolean mask of degenerate columns
    """

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        if X.shape[0] < 2:
            raise ValueError(f"need at least 2 vectors to fit, got {X.shape[0]}")
        self.mean_ = X.mean(axis=0)
        self.std_ = np.sqrt(np.mean((X - self.mean_) ** 2, axis=0))
        self.zero_variance_ = self.std_ == 0.0
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} columns, scaler was fitted on {self.n_features_in_}"
            )
        scale = np.where(self.zero_variance_, 1.0, self.std_)
        return np.where(self.zero_variance_, 0.0, (X - self.mean_) / scale)


def fit_standardizer(vectors: Sequence[FeatureVector] | np.ndarray) -> ZScoreScaler:
    """Fit a ZScoreScaler on a list of FeatureVectors (or a plain matrix)."""
    X = as_feature_matrix(vectors) if not isinstance(vectors, np.ndarray) else vectors
    return ZScoreScaler().fit(X)


def apply_standardizer(scaler: ZScoreScaler, vector: FeatureVector) -> FeatureVector:
    """Standardize one FeatureVector, keeping its label and source."""
    values = scaler.transform(vector.values.reshape(1, -1))[0]
    return FeatureVector(values=values, label=vector.label, source=vector.source)


class MfccFeaturizer(BaseEstimator, TransformerMixin):
    """Stateless transformer: AudioClips to pooled cepstral statistics.

    ``transform`` accepts a sequence of AudioClips and returns an
    (n_clips, 6 * num_coefficients) array. When ``window_seconds`` is set,
    the leading window at ``window_offset`` is analyzed instead of the
    whole clip.
    """

    def __init__(self, frame_length=1024, hop_length=512, fft_size=None,
                 taper="hamming", num_filters=26, band_low=0.0, band_high=None,
                 num_coefficients=14, include_c0=False, log_floor=1e-10,
                 window_seconds=None, window_offset=0.0):
        self.frame_length = frame_length
        self.hop_length = hop_length
        self.fft_size = fft_size
        self.taper = taper
        self.num_filters = num_filters
        self.band_low = band_low
        self.band_high = band_high
        self.num_coefficients = num_coefficients
        self.include_c0 = include_c0
        self.log_floor = log_floor
        self.window_seconds = window_seconds
        self.window_offset = window_offset

    def _config(self) -> MfccConfig:
        return MfccConfig(
            frame_length=self.frame_length,
            hop_length=self.hop_length,
            fft_size=self.fft_size,
            taper=self.taper,
            num_filters=self.num_filters,
            band_low=self.band_low,
            band_high=self.band_high,
            num_coefficients=self.num_coefficients,
            include_c0=self.include_c0,
            log_floor=self.log_floor,
        )

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        config = self._config()
        rows = []
        for clip in X:
            if not isinstance(clip, AudioClip):
                raise TypeError(f"expected AudioClip, got {type(clip).__name__}")
            if self.window_seconds is not None:
                clip = extract_window(clip, WindowSpec(self.window_seconds, self.window_offset))
            rows.append(summarize(compute_mfcc(clip, config)).values)
        return np.vstack(rows) if rows else np.empty((0, 6 * self.num_coefficients))


# ---------------------------------------------------------------------------
# Feature cache file
# ---------------------------------------------------------------------------

def write_feature_csv(vectors: Sequence[FeatureVector], path) -> None:
    """Write features as CSV: header ``source,label,f_00..f_NN``, 17
    significant digits, LF endings. Bit-identical for identical inputs.
    """
    if not vectors:
        raise ValueError("no feature vectors to write")
    width = len(vectors[0])
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["source", "label"] + [f"f_{i:02d}" for i in range(width)])
        for v in vectors:
            label = "" if v.label is None else v.label.value
            writer.writerow([v.source or "", label]
                            + [format(x, ".17g") for x in v.values])


def read_feature_csv(path) -> list[FeatureVector]:
    """Read a feature cache file back into FeatureVectors."""
    out = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header[:2] != ["source", "label"]:
            raise ValueError(f"{path}: not a feature cache file (header {header[:2]})")
        for row in reader:
            label = parse_label(row[1]) if row[1] else None
            out.append(FeatureVector(
                values=np.array([float(x) for x in row[2:]]),
                label=label,
                source=row[0] or None,
            ))
    return out

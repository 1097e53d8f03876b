"""Respiratory-sound classification and window-size sweeps.

The pipeline: decode WAV recordings, take the leading window of a chosen
duration, compute mel-frequency cepstral coefficients per frame, pool
each coefficient track into six statistics, z-score the resulting
vectors, and evaluate a k-nearest-neighbor classifier with leave-one-out
cross-validation. Sweeping the window duration from 0.5 to 20 seconds
reproduces the accuracy-versus-window-size curve this package exists to
measure.

Scikit-learn compatible estimators (``MfccFeaturizer``, ``ZScoreScaler``,
``KnnClassifier``) wrap the plain functions for pipeline use.
"""

from .audio_io import (
    AudioClip,
    ClassLabel,
    DatasetEntry,
    LabeledDataset,
    WindowSpec,
    build_manifest_from_diagnosis,
    extract_window,
    load_manifest,
    load_wav,
    parse_label,
    read_wav_info,
    write_manifest,
    write_wav16,
)
from .classifier import (
    EvalResult,
    KnnClassifier,
    KnnConfig,
    PredictionRecord,
    knn_predict,
    loocv_evaluate,
)
from .config import RunConfig, load_config_file, resolve_config
from .dsp import (
    MelFilterBank,
    MfccConfig,
    MfccMatrix,
    apply_taper,
    build_mel_filterbank,
    compute_mfcc,
    dct_ii,
    fft,
    frame_signal,
    hz_to_mel,
    mel_to_hz,
    power_spectrum,
    rfft,
    taper_window,
)
from .errors import (
    ConfigError,
    DecodeError,
    DegenerateFilterbankError,
    EmptyAudioError,
    InsufficientDurationError,
    ManifestError,
    RespSweepError,
    UnsupportedFormatError,
)
from .experiment import (
    DEFAULT_WINDOW_SIZES,
    SweepConfig,
    SweepRecord,
    SweepResult,
    emit_report,
    read_sweep_csv,
    run_sweep,
    summary_dict,
    sweep_csv_text,
    sweep_features,
)
from .features import (
    STAT_NAMES,
    FeatureVector,
    MfccFeaturizer,
    ZScoreScaler,
    apply_standardizer,
    fit_standardizer,
    read_feature_csv,
    summarize,
    write_feature_csv,
)
from .synth import generate_synthetic_corpus

__version__ = "0.1.0"

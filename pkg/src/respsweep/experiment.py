"""Window-size sweep orchestration and report emission.

For each requested window size the leading window of every recording is
featurized and the dataset is evaluated with leave-one-out KNN; the
per-size accuracies form the final curve (CSV + SVG + JSON summary).

Determinism: the analysis itself is deterministic, and the one
wall-clock quantity (per-size feature computation time) is stored in the
feature cache next to the features it measured. A cache hit reuses the
originally measured duration, so repeated runs over the same cache
produce byte-identical reports. ``seconds_elapsed`` is therefore defined
as the summed per-clip feature-computation time for that window size,
not whole-process wall clock.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .audio_io import LabeledDataset, WindowSpec, extract_window, load_wav, read_wav_info
from .classifier import EvalResult, KnnConfig, ZSCORE_MODES, loocv_evaluate
from .dsp import MfccConfig, compute_mfcc
from .errors import ConfigError, InsufficientDurationError
from .features import FeatureVector, summarize
from .svgchart import render_line_chart

DEFAULT_WINDOW_SIZES = (0.5,) + tuple(float(w) for w in range(1, 21))

SWEEP_CSV_HEADER = "window_seconds,accuracy,tn,fa,fn,ta,seconds_elapsed"


@dataclass(frozen=True)
class SweepConfig:
    """Everything a sweep needs besides the dataset itself.

    ``seed`` drives only the synthetic generator; it is carried here so a
    run's provenance record is complete.
    """

    window_sizes: tuple[float, ...] = DEFAULT_WINDOW_SIZES
    offset: float = 0.0
    mfcc: MfccConfig = MfccConfig()
    knn: KnnConfig = KnnConfig()
    zscore_mode: str = "global"
    seed: int | None = None

    def __post_init__(self):
        sizes = tuple(float(w) for w in self.window_sizes)
        if not sizes:
            raise ConfigError("window_sizes must be non-empty")
        for w in sizes:
            if not np.isfinite(w) or w <= 0:
                raise ConfigError(f"window sizes must be positive, got {w}")
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ConfigError(f"window_sizes must be strictly increasing, got {sizes}")
        object.__setattr__(self, "window_sizes", sizes)
        offset = float(self.offset)
        if not np.isfinite(offset) or offset < 0:
            raise ConfigError(f"offset must be non-negative, got {self.offset}")
        object.__setattr__(self, "offset", offset)
        if self.zscore_mode not in ZSCORE_MODES:
            raise ConfigError(
                f"zscore_mode must be one of {ZSCORE_MODES}, got {self.zscore_mode!r}"
            )

    def to_dict(self) -> dict:
        from dataclasses import asdict

        return {
            "window_sizes": list(self.window_sizes),
            "offset": self.offset,
            "mfcc": asdict(self.mfcc),
            "knn": asdict(self.knn),
            "zscore_mode": self.zscore_mode,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class SweepRecord:
    """One evaluated window size."""

    window_seconds: float
    result: EvalResult
    seconds_elapsed: float

    @property
    def n_evaluated(self) -> int:
        return self.result.total


@dataclass(frozen=True)
class SweepResult:
    """All sweep records plus the configuration that produced them."""

    records: tuple[SweepRecord, ...]
    config: SweepConfig = field(default_factory=SweepConfig)

    def __post_init__(self):
        if not self.records:
            raise ValueError("sweep produced no records")

    def accuracies(self) -> list[tuple[float, float]]:
        return [(r.window_seconds, r.result.accuracy) for r in self.records]

    def peak(self) -> SweepRecord:
        """The record with the highest accuracy; ties go to the smallest window."""
        best = self.records[0]
        for r in self.records[1:]:
            if r.result.accuracy > best.result.accuracy:
                best = r
        return best

    def mean_accuracy(self, lo: float, hi: float) -> float | None:
        """Mean accuracy over window sizes in [lo, hi]; None when empty."""
        chosen = [r.result.accuracy for r in self.records if lo <= r.window_seconds <= hi]
        return sum(chosen) / len(chosen) if chosen else None

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "records": [
                {
                    "window_seconds": r.window_seconds,
                    "seconds_elapsed": r.seconds_elapsed,
                    **r.result.to_dict(),
                }
                for r in self.records
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Feature cache
# ---------------------------------------------------------------------------

def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _cache_key(file_hash: str, window_seconds: float, offset: float,
               mfcc_dict: dict) -> str:
    """Content-addressed key: file bytes + window placement + analysis config."""
    token = "|".join([
        file_hash,
        format(float(window_seconds), ".17g"),
        format(float(offset), ".17g"),
        json.dumps(mfcc_dict, sort_keys=True),
    ])
    return hashlib.sha256(token.encode("utf-8")).hexdigest()


def _cache_load(cache_dir: str, key: str, expected_len: int):
    """Cached (values, seconds) or None if absent or unusable."""
    path = os.path.join(cache_dir, key + ".json")
    try:
        with open(path, encoding="utf-8") as f:
            payload = json.load(f)
        values = np.asarray(payload["values"], dtype=np.float64)
        seconds = float(payload["seconds"])
    except (OSError, ValueError, KeyError, TypeError):
        return None
    if values.shape != (expected_len,) or not np.all(np.isfinite(values)):
        return None
    if not np.isfinite(seconds) or seconds < 0:
        return None
    return values, seconds


def _cache_store(cache_dir: str, key: str, values: np.ndarray, seconds: float) -> None:
    """Atomic write (temp + rename): concurrent writers race benignly."""
    os.makedirs(cache_dir, exist_ok=True)
    payload = json.dumps({"values": values.tolist(), "seconds": seconds})
    fd, tmp = tempfile.mkstemp(dir=cache_dir, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(payload)
        os.replace(tmp, os.path.join(cache_dir, key + ".json"))
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _compute_clip(task):
    """Featurize every window size of one clip (worker-process safe).

    Returns (clip_index, [(values, seconds), ...]) in window-size order.
    The clip is decoded at most once, and only when some size misses the
    cache.
    """
    index, path, sizes, offset, mfcc_dict, cache_dir = task
    config = MfccConfig(**mfcc_dict)
    expected_len = 6 * config.num_coefficients
    file_hash = file_sha256(path) if cache_dir else ""
    clip = None
    out = []
    for w in sizes:
        cached = None
        key = None
        if cache_dir:
            key = _cache_key(file_hash, w, offset, mfcc_dict)
            cached = _cache_load(cache_dir, key, expected_len)
        if cached is None:
            if clip is None:
                clip = load_wav(path)
            start = time.perf_counter()
            window = extract_window(clip, WindowSpec(duration=w, offset=offset))
            values = summarize(compute_mfcc(window, config)).values
            seconds = time.perf_counter() - start
            if cache_dir:
                _cache_store(cache_dir, key, values, seconds)
                reread = _cache_load(cache_dir, key, expected_len)
                if reread is not None:  # use the stored form so reruns match
                    values, seconds = reread
            cached = (values, seconds)
        out.append(cached)
    return index, out


# ---------------------------------------------------------------------------
# Sweep
# ---------------------------------------------------------------------------

def _check_durations(dataset: LabeledDataset, config: SweepConfig) -> None:
    """Abort up front, listing every clip shorter than the largest window."""
    max_window = config.window_sizes[-1]
    offenders = []
    for entry in dataset.entries:
        info = read_wav_info(dataset.resolve(entry))
        fs = info.sample_rate
        overshoot = round(config.offset * fs) + round(max_window * fs) - info.n_frames
        if overshoot > 1:
            offenders.append(f"{entry.path} ({info.n_frames / fs:.3f} s)")
    if offenders:
        needed = config.offset + max_window
        raise InsufficientDurationError(
            f"{len(offenders)} clip(s) shorter than the {needed:g} s needed "
            f"(offset + largest window): " + ", ".join(offenders),
            requested_seconds=needed,
        )


def run_sweep(dataset: LabeledDataset, config: SweepConfig = SweepConfig(), *,
              jobs: int = 1, cache_dir=None,
              progress: Callable[[str], None] | None = None) -> SweepResult:
    """Evaluate every window size over the dataset.

    ``jobs`` > 1 featurizes clips in worker processes; results are keyed
    by clip index, so scheduling never changes the outcome. ``cache_dir``
    enables the feature cache (an optimization that must not change
    results; reruns over the same cache are byte-deterministic).
    """
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    if len(dataset) < 2:
        raise ValueError("leave-one-out evaluation needs at least 2 recordings")
    if config.knn.k > len(dataset) - 1:
        raise ConfigError(
            f"k={config.knn.k} exceeds fold size {len(dataset) - 1}"
        )
    if jobs < 1:
        raise ConfigError(f"jobs must be >= 1, got {jobs}")
    _check_durations(dataset, config)

    from dataclasses import asdict

    mfcc_dict = asdict(config.mfcc)
    cache = str(cache_dir) if cache_dir else None
    tasks = [
        (i, str(dataset.resolve(entry)), config.window_sizes, config.offset,
         mfcc_dict, cache)
        for i, entry in enumerate(dataset.entries)
    ]
    per_clip: dict[int, list] = {}
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for index, rows in pool.map(_compute_clip, tasks):
                per_clip[index] = rows
                if progress:
                    progress(f"featurized {dataset.entries[index].path}")
    else:
        for task in tasks:
            index, rows = _compute_clip(task)
            per_clip[index] = rows
            if progress:
                progress(f"featurized {dataset.entries[index].path}")

    records = []
    for s_idx, w in enumerate(config.window_sizes):
        vectors = [
            FeatureVector(values=per_clip[i][s_idx][0], label=entry.label,
                          source=entry.path)
            for i, entry in enumerate(dataset.entries)
        ]
        result = loocv_evaluate(vectors, config.knn, config.zscore_mode)
        seconds = sum(per_clip[i][s_idx][1] for i in range(len(dataset.entries)))
        records.append(SweepRecord(window_seconds=w, result=result,
                                   seconds_elapsed=seconds))
        if progress:
            progress(f"window {w:g} s: accuracy {result.accuracy:.4f}")
    return SweepResult(records=tuple(records), config=config)


def sweep_features(dataset: LabeledDataset, window_seconds: float,
                   config: SweepConfig, cache_dir=None) -> list[FeatureVector]:
    """Featurize one window size for every clip (no evaluation)."""
    single = SweepConfig(
        window_sizes=(window_seconds,), offset=config.offset, mfcc=config.mfcc,
        knn=config.knn, zscore_mode=config.zscore_mode, seed=config.seed,
    )
    _check_durations(dataset, single)
    from dataclasses import asdict

    mfcc_dict = asdict(config.mfcc)
    cache = str(cache_dir) if cache_dir else None
    out = []
    for i, entry in enumerate(dataset.entries):
        _, rows = _compute_clip((i, str(dataset.resolve(entry)),
                                 (float(window_seconds),), config.offset,
                                 mfcc_dict, cache))
        out.append(FeatureVector(values=rows[0][0], label=entry.label,
                                 source=entry.path))
    return out


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def atomic_write_text(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def sweep_csv_text(result: SweepResult) -> str:
    """CSV with 17-significant-digit floats: parses back to exact values."""
    lines = [SWEEP_CSV_HEADER]
    for r in result.records:
        e = r.result
        lines.append(",".join([
            format(r.window_seconds, ".17g"),
            format(e.accuracy, ".17g"),
            str(e.true_normal),
            str(e.false_abnormal),
            str(e.false_normal),
            str(e.true_abnormal),
            format(r.seconds_elapsed, ".17g"),
        ]))
    return "\n".join(lines) + "\n"


def read_sweep_csv(path) -> list[dict]:
    """Parse sweep.csv back into per-row dicts of exact numbers."""
    rows = []
    with open(path, encoding="utf-8") as f:
        header = f.readline().rstrip("\n")
        if header != SWEEP_CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        for line in f:
            w, acc, tn, fa, fn, ta, secs = line.rstrip("\n").split(",")
            rows.append({
                "window_seconds": float(w),
                "accuracy": float(acc),
                "tn": int(tn),
                "fa": int(fa),
                "fn": int(fn),
                "ta": int(ta),
                "seconds_elapsed": float(secs),
            })
    return rows


def summary_dict(result: SweepResult) -> dict:
    peak = result.peak()
    return {
        "n_window_sizes": len(result.records),
        "n_entries": result.records[0].result.total,
        "k": result.config.knn.k,
        "metric": result.config.knn.metric,
        "zscore_mode": result.config.zscore_mode,
        "window_seconds": [r.window_seconds for r in result.records],
        "accuracies": [r.result.accuracy for r in result.records],
        "peak_window_seconds": peak.window_seconds,
        "peak_accuracy": peak.result.accuracy,
        "mean_accuracy_2_to_10_s": result.mean_accuracy(2.0, 10.0),
        "mean_accuracy_11_to_20_s": result.mean_accuracy(11.0, 20.0),
    }


def emit_report(result: SweepResult, out_dir) -> dict[str, Path]:
    """Write sweep.csv, sweep.svg, and summary.json into out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "sweep.csv"
    svg_path = out_dir / "sweep.svg"
    summary_path = out_dir / "summary.json"

    atomic_write_text(csv_path, sweep_csv_text(result))
    points = [(w, acc * 100.0) for w, acc in result.accuracies()]
    atomic_write_text(svg_path, render_line_chart(
        points,
        x_label="Window size (s)",
        y_label="Accuracy (%)",
        title="Accuracy vs window size",
        y_min=0.0,
        y_max=100.0,
    ))
    atomic_write_text(summary_path,
                       json.dumps(summary_dict(result), indent=2, sort_keys=True) + "\n")
    return {"csv": csv_path, "svg": svg_path, "summary": summary_path}

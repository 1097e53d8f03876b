"""Run configuration: one flat, human-editable JSON file.

Precedence is built-in defaults < config file < command-line flags.
Unknown keys are rejected by name so typos fail loudly instead of
silently running defaults. A ``run.json`` provenance record written by a
previous run is accepted wherever a config file is: its ``config``
object is unwrapped and the provenance siblings are ignored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

from .classifier import KnnConfig
from .dsp import MfccConfig
from .errors import ConfigError
from .experiment import DEFAULT_WINDOW_SIZES, SweepConfig


@dataclass(frozen=True)
class RunConfig:
    """Union of the analysis, classifier, and sweep settings plus paths.

    The defaults reproduce the reference pipeline: 14 coefficients from
    1024-sample frames at 50% overlap, 26 mel filters, z-scored features,
    k=1 euclidean KNN, 21-point window sweep (0.5 s then 1-20 s).
    """

    manifest: str | None = None
    out_dir: str | None = None
    frame_length: int = 1024
    hop_length: int = 512
    fft_size: int | None = None
    taper: str = "hamming"
    num_filters: int = 26
    band_low: float = 0.0
    band_high: float | None = None
    num_coefficients: int = 14
    include_c0: bool = False
    log_floor: float = 1e-10
    k: int = 1
    metric: str = "euclidean"
    zscore_mode: str = "global"
    window_sizes: tuple[float, ...] = DEFAULT_WINDOW_SIZES
    offset: float = 0.0
    seed: int = 0
    jobs: int = 1
    cache: bool = True
    cache_dir: str | None = None
    k_sweep: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "window_sizes",
                           tuple(float(w) for w in self.window_sizes))
        if self.k_sweep is not None:
            ks = tuple(int(k) for k in self.k_sweep)
            for k in ks:
                if k < 1:
                    raise ConfigError(f"k_sweep entries must be >= 1, got {k}")
            object.__setattr__(self, "k_sweep", ks)
        if not isinstance(self.jobs, int) or self.jobs < 1:
            raise ConfigError(f"jobs must be a positive integer, got {self.jobs!r}")
        self.sweep_config()  # validates the analysis, classifier, and sweep fields

    def mfcc_config(self) -> MfccConfig:
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

    def knn_config(self) -> KnnConfig:
        return KnnConfig(k=self.k, metric=self.metric)

    def sweep_config(self) -> SweepConfig:
        return SweepConfig(
            window_sizes=self.window_sizes,
            offset=self.offset,
            mfcc=self.mfcc_config(),
            knn=self.knn_config(),
            zscore_mode=self.zscore_mode,
            seed=self.seed,
        )

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out


_KNOWN_KEYS = {f.name for f in fields(RunConfig)}


def load_config_file(path) -> dict:
    """Parse a config file into a key-value dict, rejecting unknown keys."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]  # a run.json provenance record; siblings ignored
    for key in data:
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"{path}: unknown config key {key!r}")
    return data


def resolve_config(config_path=None, overrides: dict | None = None) -> RunConfig:
    """Merge defaults, the optional config file, and explicit overrides.

    ``overrides`` entries whose value is None are treated as unset (the
    flag was not given), so they never mask file values.
    """
    merged: dict = {}
    if config_path is not None:
        merged.update(load_config_file(config_path))
    if overrides:
        merged.update({k: v for k, v in overrides.items() if v is not None})
    for key in merged:
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
    try:
        return RunConfig(**merged)
    except TypeError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None

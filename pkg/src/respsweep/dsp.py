"""Cepstral feature extraction: framing, tapers, FFT power spectra,
triangular mel filterbank pooling, log compression, and DCT-II.

The transforms are implemented here rather than delegated: an iterative
radix-2 decimation-in-time FFT (vectorized over frame batches, with a
packed real-input path for the spectrum), a matrix-form unscaled DCT-II,
and a bin-indexed triangular filterbank. numpy supplies the array
arithmetic only.

Conventions, fixed for reproducibility:

* mel scale: ``mel = 2595 * log10(1 + hz / 700)``;
* unscaled DCT-II, ``out[k] = sum_n in[n] cos(pi k (n + 0.5) / N)``;
* natural log on filterbank energies, floored at ``log_floor``;
* no pre-emphasis and no liftering.

Downstream per-column z-scoring makes the DCT scaling and log base inert
for classification, but they are pinned so cached features are bit-stable.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .audio_io import AudioClip
from .errors import ConfigError, DegenerateFilterbankError

MEL_SCALE = 2595.0
MEL_BREAK_HZ = 700.0

TAPERS = ("hamming", "hann", "rectangular")


@dataclass(frozen=True)
class MfccConfig:
    """Every knob of the cepstral pipeline.

    Defaults: 1024-sample frames with 50% overlap (hop 512), Hamming taper,
    26 triangular mel filters spanning 0 Hz to Nyquist, 14 kept
    coefficients with the gain-dominated coefficient 0 excluded.
    """

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

    def __post_init__(self):
        if self.fft_size is None:
            object.__setattr__(self, "fft_size", self.frame_length)
        if not (0 < self.hop_length <= self.frame_length <= self.fft_size):
            raise ConfigError(
                f"need 0 < hop ({self.hop_length}) <= frame ({self.frame_length})"
                f" <= fft_size ({self.fft_size})"
            )
        if not _is_pow2(self.fft_size):
            raise ConfigError(f"fft_size must be a power of two, got {self.fft_size}")
        if self.taper not in TAPERS:
            raise ConfigError(f"unknown taper {self.taper!r}, expected one of {TAPERS}")
        if self.num_filters < 1:
            raise ConfigError(f"num_filters must be positive, got {self.num_filters}")
        # keeping rows 1..N (c0 excluded) needs one more filter than rows 0..N-1
        max_coefficients = self.num_filters if self.include_c0 else self.num_filters - 1
        if not 1 <= self.num_coefficients <= max_coefficients:
            raise ConfigError(
                f"num_coefficients ({self.num_coefficients}) must be in "
                f"[1, {max_coefficients}] for {self.num_filters} filters"
                f" (include_c0={self.include_c0})"
            )
        if self.band_low < 0:
            raise ConfigError(f"band_low must be non-negative, got {self.band_low}")
        if self.band_high is not None and self.band_high <= self.band_low:
            raise ConfigError(
                f"band_high ({self.band_high}) must exceed band_low ({self.band_low})"
            )
        if self.log_floor <= 0:
            raise ConfigError(f"log_floor must be positive, got {self.log_floor}")

    def band_edges(self, sample_rate: int) -> tuple[float, float]:
        """Resolve the filterbank band against a concrete sample rate."""
        nyquist = sample_rate / 2.0
        high = nyquist if self.band_high is None else self.band_high
        if high > nyquist:
            raise ConfigError(f"band_high {high} Hz exceeds Nyquist {nyquist} Hz")
        if self.band_low >= high:
            raise ConfigError(f"band_low {self.band_low} Hz must lie below band_high {high} Hz")
        return self.band_low, high


@dataclass(frozen=True)
class MelFilterBank:
    """Triangular filter rows over the one-sided spectrum (peak weight 1)."""

    weights: np.ndarray            # (num_filters, fft_size // 2 + 1)
    center_frequencies: np.ndarray  # Hz, strictly increasing

    def __post_init__(self):
        self.weights.setflags(write=False)
        self.center_frequencies.setflags(write=False)


@dataclass(frozen=True)
class MfccMatrix:
    """Cepstral coefficients, one row per frame, with the config that made them."""

    coefficients: np.ndarray  # (num_frames, num_coefficients)
    config: MfccConfig

    def __post_init__(self):
        self.coefficients.setflags(write=False)

    @property
    def num_frames(self) -> int:
        return self.coefficients.shape[0]


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


# ---------------------------------------------------------------------------
# Mel scale
# ---------------------------------------------------------------------------

def hz_to_mel(hz):
    """Map frequency in Hz to mel: 2595 * log10(1 + hz / 700)."""
    hz = np.asarray(hz, dtype=np.float64)
    if np.any(hz < 0):
        raise ValueError("frequency must be non-negative")
    result = MEL_SCALE * np.log10(1.0 + hz / MEL_BREAK_HZ)
    return float(result) if result.ndim == 0 else result


def mel_to_hz(mel):
    """Inverse of hz_to_mel: 700 * (10 ** (mel / 2595) - 1)."""
    mel = np.asarray(mel, dtype=np.float64)
    if np.any(mel < 0):
        raise ValueError("mel value must be non-negative")
    result = MEL_BREAK_HZ * (10.0 ** (mel / MEL_SCALE) - 1.0)
    return float(result) if result.ndim == 0 else result


# ---------------------------------------------------------------------------
# Framing and tapers
# ---------------------------------------------------------------------------

def frame_signal(samples, frame_length: int, hop_length: int) -> np.ndarray:
    """Slice a signal into overlapping frames, one per row.

    Frame i covers samples [i * hop, i * hop + frame_length); trailing
    samples that do not fill a whole frame are dropped, never padded.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D signal, got shape {x.shape}")
    if not 0 < hop_length <= frame_length:
        raise ConfigError(f"need 0 < hop ({hop_length}) <= frame ({frame_length})")
    if len(x) < frame_length:
        raise ValueError(
            f"signal of {len(x)} samples is shorter than one {frame_length}-sample frame"
        )
    num_frames = (len(x) - frame_length) // hop_length + 1
    starts = np.arange(num_frames) * hop_length
    return x[starts[:, None] + np.arange(frame_length)]


_taper_cache: dict[tuple[str, int], np.ndarray] = {}


def taper_window(kind: str, length: int) -> np.ndarray:
    if kind not in TAPERS:
        raise ConfigError(f"unknown taper {kind!r}, expected one of {TAPERS}")
    key = (kind, length)
    cached = _taper_cache.get(key)
    if cached is None:
        if kind == "rectangular" or length == 1:
            cached = np.ones(length)
        else:
            n = np.arange(length)
            phase = np.cos(2.0 * np.pi * n / (length - 1))
            if kind == "hamming":
                cached = 0.54 - 0.46 * phase
            else:  # hann
                cached = 0.5 - 0.5 * phase
        cached.setflags(write=False)
        _taper_cache[key] = cached
    return cached


def apply_taper(frame, kind: str) -> np.ndarray:
    """Multiply a frame (or a batch of frames) by the chosen taper."""
    x = np.asarray(frame, dtype=np.float64)
    if x.shape[-1] == 0:
        raise ValueError("cannot taper an empty frame")
    return x * taper_window(kind, x.shape[-1])


# ---------------------------------------------------------------------------
# FFT (iterative radix-2 decimation in time, batched over leading axes)
# ---------------------------------------------------------------------------

_bitrev_cache: dict[int, np.ndarray] = {}
_twiddle_cache: dict[int, np.ndarray] = {}


def _bit_reverse_indices(n: int) -> np.ndarray:
    perm = _bitrev_cache.get(n)
    if perm is None:
        bits = n.bit_length() - 1
        idx = np.arange(n)
        perm = np.zeros(n, dtype=np.intp)
        for _ in range(bits):
            perm = (perm << 1) | (idx & 1)
            idx >>= 1
        perm.setflags(write=False)
        _bitrev_cache[n] = perm
    return perm


def _stage_twiddles(half: int) -> np.ndarray:
    tw = _twiddle_cache.get(half)
    if tw is None:
        tw = np.exp(-1j * np.pi * np.arange(half) / half)
        tw.setflags(write=False)
        _twiddle_cache[half] = tw
    return tw


def fft(x) -> np.ndarray:
    """Discrete Fourier transform over the last axis (length a power of two).

    Real or complex input; returns the full complex spectrum. Radix-2
    Cooley-Tukey: bit-reversal reorder, then log2(N) butterfly stages,
    each applied to the whole batch at once.
    """
    x = np.asarray(x)
    n = x.shape[-1]
    if not _is_pow2(n):
        raise ConfigError(f"FFT length must be a power of two, got {n}")
    out = np.ascontiguousarray(x[..., _bit_reverse_indices(n)], dtype=np.complex128)
    half = 1
    while half < n:
        tw = _stage_twiddles(half)
        blocks = out.reshape(out.shape[:-1] + (n // (2 * half), 2 * half))
        upper = blocks[..., :half]
        lower = blocks[..., half:]
        t = lower * tw
        lower[...] = upper - t
        upper += t
        half *= 2
    return out


def rfft(x) -> np.ndarray:
    """Spectrum bins 0..N/2 of a real signal via one half-length complex FFT.

    Adjacent real samples are packed into complex pairs, transformed, then
    the even/odd sub-spectra are separated by conjugate symmetry.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    if not _is_pow2(n):
        raise ConfigError(f"FFT length must be a power of two, got {n}")
    if n == 1:
        return x.astype(np.complex128)
    m = n // 2
    z = x[..., 0::2] + 1j * x[..., 1::2]
    zf = fft(z)
    mirrored = np.conj(zf[..., (-np.arange(m)) % m])
    even = 0.5 * (zf + mirrored)
    odd = -0.5j * (zf - mirrored)
    rotated = odd * np.exp(-2j * np.pi * np.arange(m) / n)
    out = np.empty(x.shape[:-1] + (m + 1,), dtype=np.complex128)
    out[..., :m] = even + rotated
    out[..., m] = even[..., 0].real - odd[..., 0].real
    return out


def power_spectrum(frame, fft_size: int) -> np.ndarray:
    """|DFT|^2 over bins 0..fft_size/2 of a frame zero-padded to fft_size.

    Accepts a single frame or a stacked batch of frames.
    """
    x = np.asarray(frame, dtype=np.float64)
    if not _is_pow2(fft_size):
        raise ConfigError(f"fft_size must be a power of two, got {fft_size}")
    if x.shape[-1] > fft_size:
        raise ValueError(f"frame of {x.shape[-1]} samples exceeds fft_size {fft_size}")
    if x.shape[-1] < fft_size:
        pad = np.zeros(x.shape[:-1] + (fft_size,), dtype=np.float64)
        pad[..., : x.shape[-1]] = x
        x = pad
    spectrum = rfft(x)
    return spectrum.real**2 + spectrum.imag**2


# ---------------------------------------------------------------------------
# Mel filterbank
# ---------------------------------------------------------------------------

def build_mel_filterbank(config: MfccConfig, sample_rate: int) -> MelFilterBank:
    """Triangular filters with centers equally spaced on the mel axis.

    num_filters + 2 boundary mels span the band; each filter rises linearly
    from the previous boundary bin to weight 1 at its own, then falls to
    the next. Boundaries that land on the same FFT bin make the bank
    degenerate and raise.
    """
    low_hz, high_hz = config.band_edges(sample_rate)
    boundaries_mel = np.linspace(hz_to_mel(low_hz), hz_to_mel(high_hz), config.num_filters + 2)
    boundaries_hz = mel_to_hz(boundaries_mel)
    bins = np.rint(boundaries_hz * config.fft_size / sample_rate).astype(int)
    if np.any(np.diff(bins) < 1):
        raise DegenerateFilterbankError(
            f"band {low_hz:g}-{high_hz:g} Hz with {config.num_filters} filters collapses "
            f"adjacent boundaries onto one bin of a {config.fft_size}-point FFT"
        )
    n_bins = config.fft_size // 2 + 1
    weights = np.zeros((config.num_filters, n_bins))
    for m in range(config.num_filters):
        lo, center, hi = bins[m], bins[m + 1], bins[m + 2]
        rising = np.arange(lo + 1, center + 1)
        weights[m, rising] = (rising - lo) / (center - lo)
        falling = np.arange(center, hi)
        weights[m, falling] = (hi - falling) / (hi - center)
    return MelFilterBank(weights=weights, center_frequencies=boundaries_hz[1:-1].copy())


# ---------------------------------------------------------------------------
# DCT-II
# ---------------------------------------------------------------------------

_dct_cache: dict[tuple[int, int, bool], np.ndarray] = {}


def _dct_basis(n: int, num_out: int, include_c0: bool) -> np.ndarray:
    """Rows of cos(pi k (j + 0.5) / n) for the kept coefficient indices k."""
    key = (n, num_out, include_c0)
    basis = _dct_cache.get(key)
    if basis is None:
        first = 0 if include_c0 else 1
        k = np.arange(first, first + num_out)
        j = np.arange(n)
        basis = np.cos(np.pi * np.outer(k, j + 0.5) / n)
        basis.setflags(write=False)
        _dct_cache[key] = basis
    return basis


def dct_ii(values, num_out: int) -> np.ndarray:
    """Unscaled DCT-II: out[k] = sum_n values[n] cos(pi k (n + 0.5) / N).

    Returns coefficients k = 0..num_out-1; works on a vector or a batch.
    """
    x = np.asarray(values, dtype=np.float64)
    n = x.shape[-1]
    if n == 0:
        raise ValueError("cannot transform an empty vector")
    if not 1 <= num_out <= n:
        raise ValueError(f"num_out ({num_out}) must be in [1, {n}]")
    return x @ _dct_basis(n, num_out, include_c0=True).T


# ---------------------------------------------------------------------------
# Full pipeline
# ---------------------------------------------------------------------------

def compute_mfcc(clip: AudioClip, config: MfccConfig = MfccConfig()) -> MfccMatrix:
    """Cepstral coefficients for every frame of a clip.

    Per frame: taper, power spectrum, filterbank pooling,
    log(max(energy, log_floor)), DCT-II, then keep coefficients 1..N
    (or 0..N-1 when include_c0 is set).
    """
    frames = frame_signal(clip.samples, config.frame_length, config.hop_length)
    tapered = apply_taper(frames, config.taper)
    spectra = power_spectrum(tapered, config.fft_size)
    bank = build_mel_filterbank(config, clip.sample_rate)
    energies = spectra @ bank.weights.T
    log_energies = np.log(np.maximum(energies, config.log_floor))
    basis = _dct_basis(config.num_filters, config.num_coefficients, config.include_c0)
    return MfccMatrix(coefficients=log_energies @ basis.T, config=config)


def mfcc_to_csv(matrix: MfccMatrix, path) -> None:
    """Debug dump: frames as rows, 17-significant-digit decimals."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for row in matrix.coefficients:
            f.write(",".join(format(v, ".17g") for v in row) + "\n")


def with_fft_size(config: MfccConfig, fft_size: int) -> MfccConfig:
    """Copy of a config with a different FFT size (validation re-runs)."""
    return replace(config, fft_size=fft_size)

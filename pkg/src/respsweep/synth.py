"""Deterministic synthetic respiratory-sound corpus.

Two constructed classes give the pipeline a dataset-free test surface:

* normal: low-passed Gaussian noise (energy concentrated below ~1 kHz)
  amplitude-modulated by a breathing cycle;
* abnormal: the same bed plus a wheeze-like narrowband tone at
  400-800 Hz, gated to the active part of each breathing cycle. The
  noise rolls off well below the tone band, so the tone is spectrally
  prominent when present.

The wheeze is active for at least 62% of every cycle and cycles last at
most 3.0 s, so the longest tone-free stretch is under 1.2 s: every
window of 2 s or more contains wheeze regardless of phase. Windows of
0.5 s can land inside a gap, which keeps the smallest sweep point from
being trivially perfect.

All randomness flows from one seed through per-clip child streams, so a
corpus regenerates byte-identically regardless of generation order.
``numpy.fft`` here is generator plumbing only; the analysis pipeline
uses its own transform kernels.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .audio_io import ClassLabel, DatasetEntry, write_manifest, write_wav16

SYNTH_SAMPLE_RATE = 44100
SYNTH_DURATION_SECONDS = 20.0


def _breath_cycle(n: int, sample_rate: int, period: float, phase: float) -> np.ndarray:
    """Cycle position in [0, 1) for each sample."""
    t = np.arange(n) / sample_rate
    return (t / period + phase) % 1.0


def _noise_bed(rng: np.random.Generator, n: int, sample_rate: int) -> np.ndarray:
    """Low-passed Gaussian noise, unit rms, DC removed."""
    white = rng.standard_normal(n)
    spectrum = np.fft.rfft(white)
    freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)
    response = 1.0 / (1.0 + (freqs / 300.0) ** 6)
    response[0] = 0.0
    shaped = np.fft.irfft(spectrum * response, n=n)
    return shaped / np.sqrt(np.mean(shaped**2))


def _wheeze_gate(cycle: np.ndarray, start: float, active_fraction: float) -> np.ndarray:
    """Per-sample gain in [0, 1]: linear-ramped gate over the active span."""
    ramp = min(0.08, active_fraction / 4.0)
    into = (cycle - start) % 1.0
    rise = np.clip(into / ramp, 0.0, 1.0)
    fall = np.clip((active_fraction - into) / ramp, 0.0, 1.0)
    return np.where(into < active_fraction, np.minimum(rise, fall), 0.0)


def synthesize_clip(rng: np.random.Generator, abnormal: bool,
                    duration_seconds: float = SYNTH_DURATION_SECONDS,
                    sample_rate: int = SYNTH_SAMPLE_RATE) -> np.ndarray:
    """One float64 clip in [-1, 1]; abnormal adds the gated wheeze tone."""
    n = int(round(duration_seconds * sample_rate))
    period = rng.uniform(2.2, 3.0)
    phase = rng.uniform(0.0, 1.0)
    cycle = _breath_cycle(n, sample_rate, period, phase)
    envelope = 0.25 + 0.75 * (0.5 - 0.5 * np.cos(2.0 * np.pi * cycle)) ** 1.3
    signal = 0.1 * envelope * _noise_bed(rng, n, sample_rate)

    if abnormal:
        f0 = rng.uniform(400.0, 800.0)
        vibrato_rate = rng.uniform(3.5, 5.5)
        vibrato_phase = rng.uniform(0.0, 2.0 * np.pi)
        tone_phase = rng.uniform(0.0, 2.0 * np.pi)
        start = rng.uniform(0.0, 1.0)
        active_fraction = rng.uniform(0.62, 0.95)
        amplitude = rng.uniform(0.2, 0.35)
        t = np.arange(n) / sample_rate
        freq = f0 * (1.0 + 0.01 * np.sin(2.0 * np.pi * vibrato_rate * t + vibrato_phase))
        angle = tone_phase + 2.0 * np.pi * np.cumsum(freq) / sample_rate
        gate = _wheeze_gate(cycle, start, active_fraction)
        signal = signal + amplitude * envelope * gate * np.sin(angle)

    peak = np.max(np.abs(signal))
    if peak > 0.92:
        signal = signal * (0.92 / peak)
    return signal


def generate_synthetic_corpus(n_normal: int, n_abnormal: int, seed: int,
                              out_dir, duration_seconds: float = SYNTH_DURATION_SECONDS,
                              sample_rate: int = SYNTH_SAMPLE_RATE) -> Path:
    """Write WAVs plus manifest.csv into out_dir; returns the manifest path.

    Clip i of each class uses the child stream (seed, class_id, i), so
    adding clips of one class never changes the other class's bytes.
    """
    if n_normal < 1 or n_abnormal < 1:
        raise ValueError(
            f"need at least one clip per class, got {n_normal} normal / {n_abnormal} abnormal"
        )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for class_id, (label, prefix, count) in enumerate([
        (ClassLabel.NORMAL, "normal", n_normal),
        (ClassLabel.ABNORMAL, "abnormal", n_abnormal),
    ]):
        for i in range(count):
            rng = np.random.default_rng([seed, class_id, i])
            samples = synthesize_clip(rng, abnormal=label is ClassLabel.ABNORMAL,
                                      duration_seconds=duration_seconds,
                                      sample_rate=sample_rate)
            name = f"{prefix}_{i:03d}.wav"
            write_wav16(out_dir / name, samples, sample_rate)
            entries.append(DatasetEntry(
                path=name,
                label=label,
                subject_id=f"syn_{prefix[0]}{i:03d}",
            ))
    manifest_path = out_dir / "manifest.csv"
    write_manifest(entries, manifest_path)
    return manifest_path

"""WAV decoding, labeled dataset manifests, and analysis-window extraction.

The decoder is a small RIFF/WAVE parser supporting uncompressed PCM
(16/24/32-bit integer, little-endian) and 32-bit IEEE float, mono or
stereo. Integer samples are scaled to [-1, 1] by the type's full-scale
value; stereo is mixed to mono by the per-sample mean of the channels.

Datasets are described by UTF-8 CSV manifests with the header
``path,label,subject_id`` (labels ``normal`` / ``abnormal``,
case-insensitive). Relative paths are resolved against the manifest's
directory. Entries are kept sorted by path so cross-validation fold
indexing is reproducible.
"""

from __future__ import annotations

import csv
import enum
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    DecodeError,
    EmptyAudioError,
    InsufficientDurationError,
    ManifestError,
    UnsupportedFormatError,
)

MANIFEST_HEADER = ("path", "label", "subject_id")

_WAVE_PCM = 0x0001
_WAVE_FLOAT = 0x0003
_WAVE_EXTENSIBLE = 0xFFFE


class ClassLabel(enum.Enum):
    NORMAL = "normal"
    ABNORMAL = "abnormal"

    def __str__(self) -> str:
        return self.value


def parse_label(token: str) -> ClassLabel:
    """Parse a manifest label token (case-insensitive)."""
    try:
        return ClassLabel(token.strip().lower())
    except ValueError:
        raise ManifestError(f"unknown label {token!r} (expected 'normal' or 'abnormal')") from None


@dataclass(frozen=True)
class AudioClip:
    """Decoded mono audio: amplitudes in [-1, 1] plus sample rate and origin."""

    samples: np.ndarray
    sample_rate: int
    source: str = "<memory>"

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        samples = np.asarray(self.samples, dtype=np.float64)
        samples.setflags(write=False)  # clips are shared across threads
        object.__setattr__(self, "samples", samples)

    @property
    def duration_seconds(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class WindowSpec:
    """A fixed-duration analysis window taken from the start of a clip."""

    duration: float
    offset: float = 0.0

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError(f"window duration must be positive, got {self.duration}")
        if self.offset < 0:
            raise ValueError(f"window offset must be non-negative, got {self.offset}")


@dataclass(frozen=True)
class DatasetEntry:
    path: str
    label: ClassLabel
    subject_id: str


@dataclass(frozen=True)
class LabeledDataset:
    """Ordered, duplicate-free collection of labeled recordings.

    ``entries`` are sorted by path; ``base_dir`` anchors relative paths.
    """

    entries: tuple[DatasetEntry, ...]
    base_dir: Path = field(default_factory=Path)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[DatasetEntry]:
        return iter(self.entries)

    def resolve(self, entry: DatasetEntry) -> Path:
        p = Path(entry.path)
        return p if p.is_absolute() else self.base_dir / p

    def label_counts(self) -> dict[ClassLabel, int]:
        counts = {ClassLabel.NORMAL: 0, ClassLabel.ABNORMAL: 0}
        for entry in self.entries:
            counts[entry.label] += 1
        return counts


@dataclass(frozen=True)
class WavInfo:
    sample_rate: int
    n_frames: int
    channels: int
    bits_per_sample: int
    format_tag: int

    @property
    def duration_seconds(self) -> float:
        return self.n_frames / self.sample_rate


@dataclass(frozen=True)
class IngestSummary:
    manifest_path: Path
    n_normal: int
    n_abnormal: int
    warnings: tuple[str, ...]
    warnings_path: Path | None


# ---------------------------------------------------------------------------
# WAV container
# ---------------------------------------------------------------------------

def _read_exact(f, n: int, what: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise DecodeError(f"truncated {what}: expected {n} bytes, found {len(data)}")
    return data


def _parse_fmt(chunk: bytes) -> tuple[int, int, int, int, int]:
    """Return (format_tag, channels, sample_rate, block_align, bits)."""
    if len(chunk) < 16:
        raise DecodeError(f"'fmt ' chunk too short ({len(chunk)} bytes)")
    tag, channels, sample_rate, _byte_rate, block_align, bits = struct.unpack(
        "<HHIIHH", chunk[:16]
    )
    if tag == _WAVE_EXTENSIBLE:
        # actual encoding lives in the first two bytes of the SubFormat GUID
        if len(chunk) < 40:
            raise DecodeError("'fmt ' extensible chunk too short for SubFormat")
        tag = struct.unpack("<H", chunk[24:26])[0]
    if tag not in (_WAVE_PCM, _WAVE_FLOAT):
        raise UnsupportedFormatError(
            f"unsupported encoding: WAVE format tag {tag} (only PCM and IEEE float)"
        )
    if channels not in (1, 2):
        raise UnsupportedFormatError(f"{channels} channels (only mono and stereo supported)")
    if sample_rate <= 0:
        raise DecodeError("'fmt ' chunk declares a zero sample rate")
    if tag == _WAVE_PCM and bits not in (16, 24, 32):
        raise UnsupportedFormatError(f"{bits}-bit integer PCM not supported (16/24/32 only)")
    if tag == _WAVE_FLOAT and bits != 32:
        raise UnsupportedFormatError(f"{bits}-bit float not supported (32 only)")
    expected_align = channels * bits // 8
    if block_align != expected_align:
        raise DecodeError(
            f"'fmt ' block alignment {block_align} inconsistent with "
            f"{channels}x{bits}-bit frames ({expected_align})"
        )
    return tag, channels, sample_rate, block_align, bits


def _walk_wav(path, want_data: bool):
    """Parse chunks; return (fmt fields, data bytes or data length)."""
    with open(path, "rb") as f:
        header = f.read(12)
        if len(header) < 12 or header[:4] != b"RIFF":
            raise DecodeError(f"{path}: not a RIFF container (missing 'RIFF' header)")
        if header[8:12] != b"WAVE":
            raise DecodeError(f"{path}: RIFF form type is {header[8:12]!r}, not 'WAVE'")
        fmt = None
        while True:
            head = f.read(8)
            if not head:
                raise DecodeError(f"{path}: missing 'data' chunk")
            if len(head) < 8:
                raise DecodeError(f"{path}: truncated chunk header at end of file")
            chunk_id, size = struct.unpack("<4sI", head)
            if chunk_id == b"fmt ":
                fmt = _parse_fmt(_read_exact(f, size, "'fmt ' chunk"))
                if size % 2:
                    f.seek(1, os.SEEK_CUR)
            elif chunk_id == b"data":
                if fmt is None:
                    raise DecodeError(f"{path}: 'data' chunk appears before 'fmt '")
                if size == 0:
                    raise EmptyAudioError(f"{path}: 'data' chunk is empty")
                if size % fmt[3] != 0:
                    raise DecodeError(
                        f"{path}: 'data' chunk size {size} is not a whole number of frames"
                    )
                if want_data:
                    return fmt, _read_exact(f, size, "'data' chunk")
                return fmt, size
            else:
                f.seek(size + (size % 2), os.SEEK_CUR)


def read_wav_info(path) -> WavInfo:
    """Read container metadata without decoding the sample payload."""
    (tag, channels, sample_rate, block_align, bits), data_size = _walk_wav(path, want_data=False)
    return WavInfo(
        sample_rate=sample_rate,
        n_frames=data_size // block_align,
        channels=channels,
        bits_per_sample=bits,
        format_tag=tag,
    )


def load_wav(path) -> AudioClip:
    """Decode a RIFF/WAVE file to a mono AudioClip with samples in [-1, 1].

    Raises DecodeError for malformed containers, UnsupportedFormatError for
    encodings outside PCM int 16/24/32 and float32, and EmptyAudioError for
    a zero-length data chunk.
    """
    (tag, channels, sample_rate, _align, bits), raw = _walk_wav(path, want_data=True)
    if tag == _WAVE_FLOAT:
        x = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        if not np.all(np.isfinite(x)):
            raise DecodeError(f"{path}: 'data' chunk contains non-finite float samples")
    elif bits == 16:
        x = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    elif bits == 32:
        x = np.frombuffer(raw, dtype="<i4").astype(np.float64) / 2147483648.0
    else:  # 24-bit: assemble little-endian triplets, then sign-extend
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        v = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        v = (v ^ 0x800000) - 0x800000
        x = v.astype(np.float64) / 8388608.0
    if channels == 2:
        x = x.reshape(-1, 2).mean(axis=1)
    if tag == _WAVE_FLOAT:
        x = np.clip(x, -1.0, 1.0)
    return AudioClip(samples=x, sample_rate=sample_rate, source=str(path))


def write_wav16(path, samples, sample_rate: int) -> None:
    """Write mono float samples as 16-bit little-endian PCM.

    Encoding rounds ``sample * 32768`` and clips to the int16 range, so a
    write/read round trip is exact to within 1/32768.
    """
    x = np.asarray(samples, dtype=np.float64)
    pcm = np.clip(np.rint(x * 32768.0), -32768, 32767).astype("<i2")
    data = pcm.tobytes()
    with open(path, "wb") as f:
        f.write(struct.pack("<4sI4s", b"RIFF", 36 + len(data), b"WAVE"))
        f.write(struct.pack("<4sIHHIIHH", b"fmt ", 16, _WAVE_PCM, 1,
                            sample_rate, sample_rate * 2, 2, 16))
        f.write(struct.pack("<4sI", b"data", len(data)))
        f.write(data)


# ---------------------------------------------------------------------------
# Windows
# ---------------------------------------------------------------------------

def extract_window(clip: AudioClip, spec: WindowSpec) -> AudioClip:
    """Return the clip restricted to ``spec``: samples from round(offset*fs)
    spanning round(duration*fs). One trailing sample of float rounding is
    forgiven; anything more raises InsufficientDurationError.
    """
    fs = clip.sample_rate
    start = round(spec.offset * fs)
    length = round(spec.duration * fs)
    overshoot = start + length - len(clip.samples)
    if overshoot > 1:
        raise InsufficientDurationError(
            f"window of {spec.duration:g} s at offset {spec.offset:g} s needs "
            f"{spec.offset + spec.duration:g} s but {clip.source!r} has only "
            f"{clip.duration_seconds:g} s",
            available_seconds=clip.duration_seconds,
            requested_seconds=spec.offset + spec.duration,
        )
    if overshoot > 0:
        length -= overshoot
    return AudioClip(
        samples=clip.samples[start:start + length],
        sample_rate=fs,
        source=clip.source,
    )


# ---------------------------------------------------------------------------
# Manifests
# ---------------------------------------------------------------------------

def load_manifest(path) -> LabeledDataset:
    """Load a ``path,label,subject_id`` CSV manifest into a LabeledDataset.

    Rows come back sorted by path regardless of file order; duplicate paths
    and unknown label tokens raise ManifestError with the offending line.
    """
    path = Path(path)
    entries: list[DatasetEntry] = []
    seen: set[str] = set()
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError(f"{path}: empty manifest", line=1) from None
        if tuple(h.strip() for h in header) != MANIFEST_HEADER:
            raise ManifestError(
                f"{path}: bad header {header!r}, expected {','.join(MANIFEST_HEADER)}",
                line=1,
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ManifestError(
                    f"{path}: line {lineno}: expected 3 fields, got {len(row)}", line=lineno
                )
            entry_path, label_token, subject = (c.strip() for c in row)
            try:
                label = parse_label(label_token)
            except ManifestError as exc:
                raise ManifestError(f"{path}: line {lineno}: {exc}", line=lineno) from None
            if entry_path in seen:
                raise ManifestError(
                    f"{path}: line {lineno}: duplicate path {entry_path!r}", line=lineno
                )
            seen.add(entry_path)
            entries.append(DatasetEntry(path=entry_path, label=label, subject_id=subject))
    entries.sort(key=lambda e: e.path)
    return LabeledDataset(entries=tuple(entries), base_dir=path.parent)


def write_manifest(entries: Sequence[DatasetEntry], path) -> Path:
    """Write entries (sorted by path) as a UTF-8, LF-terminated manifest."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for entry in sorted(entries, key=lambda e: e.path):
            writer.writerow([entry.path, entry.label.value, entry.subject_id])
    return path


def build_manifest_from_diagnosis(audio_dir, diagnosis_file, out) -> IngestSummary:
    """Build a manifest from an ICBHI-style directory layout.

    ``diagnosis_file`` maps subject id to diagnosis, one pair per line,
    tab- or comma-separated. A ``Healthy`` diagnosis labels the subject's
    recordings normal; every other diagnosis labels them abnormal. Audio
    filenames must start with the subject id followed by ``_``; WAVs whose
    subject has no diagnosis entry are excluded and listed in a
    ``<out>.warnings.txt`` sidecar.
    """
    audio_dir = Path(audio_dir)
    out = Path(out)
    diagnosis: dict[str, str] = {}
    with open(diagnosis_file, encoding="utf-8") as f:
        for raw in f:
            line = raw.strip()
            if not line:
                continue
            parts = line.split("\t") if "\t" in line else line.split(",")
            if len(parts) != 2:
                raise ManifestError(
                    f"{diagnosis_file}: expected two columns, got {line!r}"
                )
            diagnosis[parts[0].strip()] = parts[1].strip()

    entries: list[DatasetEntry] = []
    warnings: list[str] = []
    for name in sorted(p.name for p in audio_dir.glob("*.wav")):
        subject = name.split("_", 1)[0]
        if "_" not in name or subject not in diagnosis:
            warnings.append(f"{name}: no diagnosis entry for subject {subject!r}; excluded")
            continue
        is_healthy = diagnosis[subject].lower() == "healthy"
        label = ClassLabel.NORMAL if is_healthy else ClassLabel.ABNORMAL
        rel = Path(os.path.relpath(audio_dir / name, out.parent))
        entries.append(DatasetEntry(path=rel.as_posix(), label=label, subject_id=subject))

    write_manifest(entries, out)
    warnings_path = None
    if warnings:
        warnings_path = Path(str(out) + ".warnings.txt")
        warnings_path.write_text("\n".join(warnings) + "\n", encoding="utf-8")
    counts = {ClassLabel.NORMAL: 0, ClassLabel.ABNORMAL: 0}
    for entry in entries:
        counts[entry.label] += 1
    return IngestSummary(
        manifest_path=out,
        n_normal=counts[ClassLabel.NORMAL],
        n_abnormal=counts[ClassLabel.ABNORMAL],
        warnings=tuple(warnings),
        warnings_path=warnings_path,
    )

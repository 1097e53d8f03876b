"""Unit tests for WAV decoding, windowing, and manifest handling."""

import struct

import numpy as np
import pytest

from respsweep.audio_io import (
    AudioClip,
    ClassLabel,
    DatasetEntry,
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
from respsweep.errors import (
    DecodeError,
    EmptyAudioError,
    InsufficientDurationError,
    ManifestError,
    UnsupportedFormatError,
)


def wav_bytes(data: bytes, *, tag=1, channels=1, rate=8000, bits=16,
              extensible_subformat=None) -> bytes:
    """Assemble a minimal RIFF/WAVE container around raw sample data."""
    block_align = channels * bits // 8
    if extensible_subformat is None:
        fmt = struct.pack("<HHIIHH", tag, channels, rate,
                          rate * block_align, block_align, bits)
    else:
        guid = struct.pack("<H", extensible_subformat) + b"\x00" * 14
        fmt = struct.pack("<HHIIHHHHI", 0xFFFE, channels, rate,
                          rate * block_align, block_align, bits, 22, bits, 0) + guid
    chunks = b"WAVE"
    chunks += b"fmt " + struct.pack("<I", len(fmt)) + fmt
    chunks += b"data" + struct.pack("<I", len(data)) + data
    if len(data) % 2:
        chunks += b"\x00"
    return b"RIFF" + struct.pack("<I", len(chunks)) + chunks


class TestWavDecoding:
    def test_write_read_round_trip(self, tmp_path):
        rng = np.random.default_rng(41)
        samples = np.clip(rng.standard_normal(5000) * 0.3, -1.0, 1.0)
        path = tmp_path / "clip.wav"
        write_wav16(path, samples, 8000)
        clip = load_wav(path)
        assert clip.sample_rate == 8000
        assert len(clip.samples) == 5000
        assert np.max(np.abs(clip.samples - samples)) <= 1.0 / 32768

    def test_16bit_values(self, tmp_path):
        data = struct.pack("<4h", 0, 16384, -16384, -32768)
        path = tmp_path / "v.wav"
        path.write_bytes(wav_bytes(data))
        clip = load_wav(path)
        assert clip.samples == pytest.approx([0.0, 0.5, -0.5, -1.0])

    def test_stereo_averages_channels(self, tmp_path):
        data = struct.pack("<4h", 16384, -16384, 8192, 8192)  # L,R,L,R
        path = tmp_path / "st.wav"
        path.write_bytes(wav_bytes(data, channels=2))
        clip = load_wav(path)
        assert clip.samples == pytest.approx([0.0, 0.25])

    def test_24bit_decoding(self, tmp_path):
        def pack24(v):
            return struct.pack("<i", v)[:3]

        data = pack24(0) + pack24(4194304) + pack24(-4194304) + pack24(-8388608)
        path = tmp_path / "d24.wav"
        path.write_bytes(wav_bytes(data, bits=24))
        clip = load_wav(path)
        assert clip.samples == pytest.approx([0.0, 0.5, -0.5, -1.0])

    def test_32bit_int_decoding(self, tmp_path):
        data = struct.pack("<3i", 0, 2**30, -(2**31))
        path = tmp_path / "d32.wav"
        path.write_bytes(wav_bytes(data, bits=32))
        clip = load_wav(path)
        assert clip.samples == pytest.approx([0.0, 0.5, -1.0])

    def test_float32_decoding(self, tmp_path):
        data = struct.pack("<4f", 0.0, 0.25, -0.5, 1.0)
        path = tmp_path / "f32.wav"
        path.write_bytes(wav_bytes(data, tag=3, bits=32))
        clip = load_wav(path)
        assert clip.samples == pytest.approx([0.0, 0.25, -0.5, 1.0])

    def test_float_overrange_clipped(self, tmp_path):
        data = struct.pack("<2f", 1.5, -2.0)
        path = tmp_path / "hot.wav"
        path.write_bytes(wav_bytes(data, tag=3, bits=32))
        clip = load_wav(path)
        assert clip.samples == pytest.approx([1.0, -1.0])

    def test_float_nan_rejected(self, tmp_path):
        data = struct.pack("<2f", float("nan"), 0.0)
        path = tmp_path / "nan.wav"
        path.write_bytes(wav_bytes(data, tag=3, bits=32))
        with pytest.raises(DecodeError):
            load_wav(path)

    def test_extensible_pcm(self, tmp_path):
        data = struct.pack("<2h", 16384, -16384)
        path = tmp_path / "ext.wav"
        path.write_bytes(wav_bytes(data, extensible_subformat=1))
        clip = load_wav(path)
        assert clip.samples == pytest.approx([0.5, -0.5])

    def test_unsupported_8bit(self, tmp_path):
        path = tmp_path / "u8.wav"
        path.write_bytes(wav_bytes(b"\x80\x80", bits=8))
        with pytest.raises(UnsupportedFormatError):
            load_wav(path)

    def test_unsupported_compression_tag(self, tmp_path):
        path = tmp_path / "alaw.wav"
        path.write_bytes(wav_bytes(b"\x00\x00", tag=6))
        with pytest.raises(UnsupportedFormatError):
            load_wav(path)

    def test_empty_data_chunk(self, tmp_path):
        path = tmp_path / "empty.wav"
        path.write_bytes(wav_bytes(b""))
        with pytest.raises(EmptyAudioError):
            load_wav(path)

    def test_garbage_rejected(self, tmp_path):
        path = tmp_path / "noise.bin"
        path.write_bytes(b"this is not audio at all, sorry")
        with pytest.raises(DecodeError):
            load_wav(path)

    def test_truncated_rejected(self, tmp_path):
        good = wav_bytes(struct.pack("<4h", 1, 2, 3, 4))
        path = tmp_path / "cut.wav"
        path.write_bytes(good[: len(good) - 5])
        with pytest.raises(DecodeError):
            load_wav(path)

    def test_unknown_chunks_skipped(self, tmp_path):
        data = struct.pack("<2h", 100, -100)
        fmt = struct.pack("<HHIIHH", 1, 1, 8000, 16000, 2, 16)
        junk = b"LIST" + struct.pack("<I", 5) + b"INFOx" + b"\x00"  # odd size, padded
        chunks = (b"WAVE" + junk + b"fmt " + struct.pack("<I", len(fmt)) + fmt
                  + b"data" + struct.pack("<I", len(data)) + data)
        path = tmp_path / "chunky.wav"
        path.write_bytes(b"RIFF" + struct.pack("<I", len(chunks)) + chunks)
        assert len(load_wav(path).samples) == 2

    def test_read_wav_info_without_decoding(self, tmp_path):
        path = tmp_path / "probe.wav"
        write_wav16(path, np.zeros(4000), 8000)
        info = read_wav_info(path)
        assert info.sample_rate == 8000
        assert info.n_frames == 4000
        assert info.channels == 1
        assert info.bits_per_sample == 16


class TestAudioClip:
    def test_duration(self):
        clip = AudioClip(samples=np.zeros(8000), sample_rate=16000, source="s")
        assert clip.duration_seconds == pytest.approx(0.5)

    def test_invalid_sample_rate(self):
        with pytest.raises(ValueError):
            AudioClip(samples=np.zeros(10), sample_rate=0, source="s")

    def test_samples_read_only(self):
        clip = AudioClip(samples=np.zeros(10), sample_rate=8000, source="s")
        with pytest.raises(ValueError):
            clip.samples[0] = 1.0


class TestExtractWindow:
    def _clip(self, n=8000, rate=8000):
        return AudioClip(samples=np.arange(n, dtype=np.float64) / n,
                         sample_rate=rate, source="mem")

    def test_leading_window(self):
        clip = self._clip()
        window = extract_window(clip, WindowSpec(duration=0.5))
        assert len(window.samples) == 4000
        assert np.array_equal(window.samples, clip.samples[:4000])

    def test_offset_window(self):
        clip = self._clip()
        window = extract_window(clip, WindowSpec(duration=0.25, offset=0.5))
        assert np.array_equal(window.samples, clip.samples[4000:6000])

    def test_full_length(self):
        clip = self._clip()
        assert len(extract_window(clip, WindowSpec(duration=1.0)).samples) == 8000

    def test_single_sample_overshoot_forgiven(self):
        clip = AudioClip(samples=np.zeros(7999), sample_rate=8000, source="m")
        window = extract_window(clip, WindowSpec(duration=1.0))
        assert len(window.samples) == 7999

    def test_real_overshoot_rejected(self):
        clip = self._clip()
        with pytest.raises(InsufficientDurationError) as err:
            extract_window(clip, WindowSpec(duration=1.5))
        assert err.value.requested_seconds == pytest.approx(1.5)

    def test_offset_pushes_past_end(self):
        clip = self._clip()
        with pytest.raises(InsufficientDurationError):
            extract_window(clip, WindowSpec(duration=0.5, offset=0.75))

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            WindowSpec(duration=0.0)
        with pytest.raises(ValueError):
            WindowSpec(duration=1.0, offset=-0.1)


class TestManifests:
    def test_write_read_round_trip(self, tmp_path):
        entries = [
            DatasetEntry("b.wav", ClassLabel.ABNORMAL, "s2"),
            DatasetEntry("a.wav", ClassLabel.NORMAL, "s1"),
        ]
        path = tmp_path / "manifest.csv"
        write_manifest(entries, path)
        dataset = load_manifest(path)
        assert [e.path for e in dataset.entries] == ["a.wav", "b.wav"]  # sorted
        assert dataset.entries[0].label is ClassLabel.NORMAL
        assert dataset.base_dir == tmp_path

    def test_label_parsing(self):
        assert parse_label("Normal") is ClassLabel.NORMAL
        assert parse_label("ABNORMAL") is ClassLabel.ABNORMAL
        with pytest.raises(ManifestError):
            parse_label("healthy-ish")

    def test_duplicate_paths_rejected(self, tmp_path):
        path = tmp_path / "dup.csv"
        path.write_text("path,label,subject_id\nx.wav,normal,s1\nx.wav,abnormal,s2\n")
        with pytest.raises(ManifestError):
            load_manifest(path)

    def test_bad_label_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("path,label,subject_id\nx.wav,sickly,s1\n")
        with pytest.raises(ManifestError) as err:
            load_manifest(path)
        assert err.value.line == 2

    def test_missing_header(self, tmp_path):
        path = tmp_path / "nohdr.csv"
        path.write_text("x.wav,normal,s1\n")
        with pytest.raises(ManifestError):
            load_manifest(path)

    def test_label_counts(self, tmp_path):
        path = tmp_path / "m.csv"
        write_manifest([
            DatasetEntry("a.wav", ClassLabel.NORMAL, "s1"),
            DatasetEntry("b.wav", ClassLabel.ABNORMAL, "s2"),
            DatasetEntry("c.wav", ClassLabel.ABNORMAL, "s3"),
        ], path)
        counts = load_manifest(path).label_counts()
        assert counts[ClassLabel.NORMAL] == 1
        assert counts[ClassLabel.ABNORMAL] == 2


class TestDiagnosisIngest:
    def _tree(self, tmp_path):
        audio = tmp_path / "audio"
        audio.mkdir()
        for name in ("101_1b1_Al_sc_Meditron.wav", "102_1b1_Ar_sc_Meditron.wav",
                     "103_2b2_Ar_mc_LittC2SE.wav", "999_1b1_Pl_sc_Litt3200.wav"):
            write_wav16(audio / name, np.zeros(100), 8000)
        (audio / "notes.txt").write_text("not audio\n")
        diagnosis = tmp_path / "diagnosis.txt"
        diagnosis.write_text("101\tHealthy\n102\tAsthma\n103,Pneumonia\n")
        return audio, diagnosis

    def test_builds_labeled_manifest(self, tmp_path):
        audio, diagnosis = self._tree(tmp_path)
        out = tmp_path / "manifest.csv"
        summary = build_manifest_from_diagnosis(audio, diagnosis, out)
        assert summary.n_normal == 1
        assert summary.n_abnormal == 2
        dataset = load_manifest(out)
        by_subject = {e.subject_id: e.label for e in dataset.entries}
        assert by_subject == {"101": ClassLabel.NORMAL, "102": ClassLabel.ABNORMAL,
                              "103": ClassLabel.ABNORMAL}

    def test_undiagnosed_files_warned(self, tmp_path):
        audio, diagnosis = self._tree(tmp_path)
        out = tmp_path / "manifest.csv"
        summary = build_manifest_from_diagnosis(audio, diagnosis, out)
        assert any("999" in w for w in summary.warnings)
        assert summary.warnings_path is not None
        assert summary.warnings_path.exists()

    def test_paths_resolve_against_manifest(self, tmp_path):
        audio, diagnosis = self._tree(tmp_path)
        out = tmp_path / "manifest.csv"
        build_manifest_from_diagnosis(audio, diagnosis, out)
        dataset = load_manifest(out)
        for entry in dataset.entries:
            assert dataset.resolve(entry).exists()

    def test_missing_diagnosis_file(self, tmp_path):
        audio = tmp_path / "audio"
        audio.mkdir()
        with pytest.raises(FileNotFoundError):
            build_manifest_from_diagnosis(audio, tmp_path / "none.txt",
                                          tmp_path / "out.csv")

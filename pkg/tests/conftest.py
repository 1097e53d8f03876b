"""Shared fixtures: a small fast corpus and a full-rate one."""

import pytest

from respsweep.audio_io import load_manifest
from respsweep.synth import generate_synthetic_corpus


@pytest.fixture(scope="session")
def mini_corpus_manifest(tmp_path_factory):
    """2+2 clips, 3 s at 22050 Hz: fast enough for per-test sweeps."""
    out = tmp_path_factory.mktemp("mini_corpus")
    return generate_synthetic_corpus(2, 2, seed=11, out_dir=out,
                                     duration_seconds=3.0, sample_rate=22050)


@pytest.fixture(scope="session")
def mini_corpus(mini_corpus_manifest):
    return load_manifest(mini_corpus_manifest)


@pytest.fixture(scope="session")
def small_corpus_manifest(tmp_path_factory):
    """3+3 clips, 4 s at 22050 Hz: enough entries for k=3 evaluations."""
    out = tmp_path_factory.mktemp("small_corpus")
    return generate_synthetic_corpus(3, 3, seed=5, out_dir=out,
                                     duration_seconds=4.0, sample_rate=22050)


@pytest.fixture(scope="session")
def small_corpus(small_corpus_manifest):
    return load_manifest(small_corpus_manifest)

"""Unit tests for statistical pooling and standardization."""

import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import Pipeline

from respsweep.audio_io import AudioClip, ClassLabel
from respsweep.features import (
    STAT_NAMES,
    FeatureVector,
    MfccFeaturizer,
    ZScoreScaler,
    apply_standardizer,
    as_feature_matrix,
    column_statistics,
    fit_standardizer,
    read_feature_csv,
    summarize,
    write_feature_csv,
)

from oracles import moments_by_direct_summation


class TestSummarize:
    def test_one_two_three(self):
        v = summarize(np.array([[1.0], [2.0], [3.0]]))
        expected = [1.0, 3.0, 2.0, math.sqrt(2.0 / 3.0), 0.0, 1.5]
        assert v.values == pytest.approx(expected, abs=1e-12)

    def test_stat_order_is_coefficient_major(self):
        matrix = np.column_stack([np.array([1.0, 2.0, 3.0]), np.full(3, 5.0)])
        v = summarize(matrix)
        assert len(v) == 12
        # first six belong to column 0, next six to the constant column
        assert v.values[0:2] == pytest.approx([1.0, 3.0])
        assert v.values[6:12] == pytest.approx([5.0, 5.0, 5.0, 0.0, 0.0, 0.0])

    def test_zero_variance_conventions(self):
        stats = column_statistics(np.full(10, 7.0))
        by_name = dict(zip(STAT_NAMES, stats))
        assert by_name["std"] == 0.0
        assert by_name["skewness"] == 0.0
        assert by_name["kurtosis"] == 0.0

    def test_matches_direct_summation(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            track = rng.standard_normal(rng.integers(2, 200)) * rng.uniform(0.1, 50)
            mine = dict(zip(STAT_NAMES, column_statistics(track)))
            ref = moments_by_direct_summation(track)
            for name in STAT_NAMES:
                assert mine[name] == pytest.approx(ref[name], abs=1e-10), name

    def test_affine_covariance(self):
        rng = np.random.default_rng(22)
        track = rng.standard_normal(100)
        base = column_statistics(track)
        for alpha in (0.5, 3.0):
            scaled = column_statistics(track * alpha)
            assert scaled[:4] == pytest.approx(base[:4] * alpha, rel=1e-9)
            assert scaled[4:] == pytest.approx(base[4:], rel=1e-9)

    def test_carries_label_and_source(self):
        v = summarize(np.ones((2, 1)), label=ClassLabel.ABNORMAL, source="x.wav")
        assert v.label is ClassLabel.ABNORMAL
        assert v.source == "x.wav"

    def test_rejects_empty_and_non_matrix(self):
        with pytest.raises(ValueError):
            summarize(np.empty((0, 3)))
        with pytest.raises(ValueError):
            summarize(np.ones(5))

    def test_feature_vector_rejects_non_finite(self):
        with pytest.raises(ValueError):
            FeatureVector(values=np.array([1.0, np.nan]))


class TestZScoreScaler:
    def test_fit_apply_means_and_stds(self):
        rng = np.random.default_rng(23)
        X = rng.standard_normal((40, 7)) * rng.uniform(0.5, 4.0, size=7) + 3.0
        scaler = ZScoreScaler().fit(X)
        Z = scaler.transform(X)
        assert np.max(np.abs(Z.mean(axis=0))) < 1e-10
        assert np.max(np.abs(np.sqrt(np.mean(Z**2, axis=0)) - 1.0)) < 1e-10

    def test_one_two_three_column(self):
        X = np.array([[1.0], [2.0], [3.0]])
        Z = ZScoreScaler().fit(X).transform(X)
        root = math.sqrt(3.0 / 2.0)
        assert Z[:, 0] == pytest.approx([-root, 0.0, root], abs=1e-12)

    def test_zero_variance_column_zeros_out(self):
        X = np.array([[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]])
        scaler = ZScoreScaler().fit(X)
        Z = scaler.transform(X)
        assert bool(scaler.zero_variance_[1])
        assert np.all(Z[:, 1] == 0.0)

    def test_population_divisor(self):
        X = np.array([[0.0], [2.0]])
        scaler = ZScoreScaler().fit(X)
        assert scaler.std_[0] == pytest.approx(1.0)  # divisor n, not n-1

    def test_needs_two_rows(self):
        with pytest.raises(ValueError):
            ZScoreScaler().fit(np.ones((1, 3)))

    def test_dimension_mismatch(self):
        scaler = ZScoreScaler().fit(np.random.default_rng(0).standard_normal((5, 3)))
        with pytest.raises(ValueError):
            scaler.transform(np.ones((2, 4)))

    def test_sklearn_clone(self):
        clone(ZScoreScaler())  # estimator protocol: clonable before fit

    def test_wrappers_keep_metadata(self):
        vectors = [
            FeatureVector(np.array([0.0, 1.0]), label=ClassLabel.NORMAL, source="a"),
            FeatureVector(np.array([2.0, 3.0]), label=ClassLabel.ABNORMAL, source="b"),
        ]
        scaler = fit_standardizer(vectors)
        out = apply_standardizer(scaler, vectors[0])
        assert out.label is ClassLabel.NORMAL
        assert out.source == "a"
        assert out.values == pytest.approx([-1.0, -1.0])

    def test_as_feature_matrix_checks_lengths(self):
        with pytest.raises(ValueError):
            as_feature_matrix([
                FeatureVector(np.array([1.0])),
                FeatureVector(np.array([1.0, 2.0])),
            ])
        with pytest.raises(ValueError):
            as_feature_matrix([])


class TestMfccFeaturizer:
    def _clips(self):
        rng = np.random.default_rng(24)
        return [
            AudioClip(samples=rng.standard_normal(22050) * 0.1,
                      sample_rate=22050, source=f"clip{i}")
            for i in range(3)
        ]

    def test_transform_shape(self):
        X = MfccFeaturizer().fit(None).transform(self._clips())
        assert X.shape == (3, 84)

    def test_windowed_transform(self):
        featurizer = MfccFeaturizer(window_seconds=0.5)
        X = featurizer.transform(self._clips())
        assert X.shape == (3, 84)

    def test_rejects_non_clip(self):
        with pytest.raises(TypeError):
            MfccFeaturizer().transform([np.ones(22050)])

    def test_sklearn_params_round_trip(self):
        featurizer = MfccFeaturizer(num_coefficients=10, window_seconds=2.0)
        params = featurizer.get_params()
        assert params["num_coefficients"] == 10
        cloned = clone(featurizer)
        assert cloned.get_params() == params

    def test_pipeline_composition(self, mini_corpus):
        from respsweep.audio_io import load_wav
        from respsweep.classifier import KnnClassifier

        clips, labels = [], []
        for entry in mini_corpus.entries:
            clips.append(load_wav(mini_corpus.resolve(entry)))
            labels.append(entry.label.value)
        pipeline = Pipeline([
            ("features", MfccFeaturizer(window_seconds=2.0)),
            ("scale", ZScoreScaler()),
            ("knn", KnnClassifier(k=1)),
        ])
        pipeline.fit(clips, labels)
        predictions = pipeline.predict(clips)
        # every clip is its own nearest neighbor after fitting on itself
        assert list(predictions) == labels


class TestFeatureCsv:
    def _vectors(self):
        rng = np.random.default_rng(25)
        return [
            FeatureVector(rng.standard_normal(84) * 7.3,
                          label=ClassLabel.NORMAL if i % 2 == 0 else ClassLabel.ABNORMAL,
                          source=f"clip_{i}.wav")
            for i in range(4)
        ]

    def test_header_names_84_features(self, tmp_path):
        path = tmp_path / "features.csv"
        write_feature_csv(self._vectors(), path)
        header = path.read_text().splitlines()[0]
        assert header.startswith("source,label,f_00,f_01")
        assert header.endswith("f_83")

    def test_round_trip_exact(self, tmp_path):
        path = tmp_path / "features.csv"
        vectors = self._vectors()
        write_feature_csv(vectors, path)
        back = read_feature_csv(path)
        assert len(back) == len(vectors)
        for a, b in zip(vectors, back):
            assert np.array_equal(a.values, b.values)  # bit-exact via 17 digits
            assert a.label is b.label
            assert a.source == b.source

    def test_bit_identical_rewrites(self, tmp_path):
        vectors = self._vectors()
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_feature_csv(vectors, p1)
        write_feature_csv(vectors, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_rejects_foreign_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ValueError):
            read_feature_csv(path)

#!/usr/bin/env python3
"""
test_gmm.py

Test the gmm.py module.
"""

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from farfieldsv import gmm
from farfieldsv.exceptions import DimensionError, InsufficientDataError
from farfieldsv.featurematrix import FeatureMatrix
from farfieldsv.gmm import BwStats, GmmUbm


@pytest.fixture(scope="module")
def test_frames():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(600, 2)) * [1.0, 0.5] + [-4.0, 0.0]
    b = rng.normal(size=(600, 2)) * [0.5, 1.0] + [4.0, 2.0]
    return [a, b]


@pytest.fixture(scope="module")
def test_ubm(test_frames):
    return gmm.ubm_train_em(test_frames, 2, iterations=10, seed=0)


@pytest.fixture(scope="module")
def test_path(tmp_path_factory):
    return tmp_path_factory.mktemp("test_gmm")


class TestGmmUbm:
    """
    Test GmmUbm class.

    """

    def test_instance(self):
        assert isinstance(GmmUbm(), GmmUbm)

    def test_shapes(self):
        with pytest.raises(DimensionError):
            GmmUbm(weights=np.array([0.5, 0.5]), means=np.zeros((2, 3)), covariances=np.ones((2, 2, 2)))

    def test_simplex(self):
        with pytest.raises(DimensionError):
            GmmUbm(weights=np.array([0.7, 0.7]), means=np.zeros((2, 1)), covariances=np.ones((2, 1, 1)))

    def test_loglik(self):
        ubm = GmmUbm(
            weights=np.array([0.3, 0.7]),
            means=np.array([[0.0, 0.0], [1.0, -1.0]]),
            covariances=np.array([np.eye(2), [[2.0, 0.5], [0.5, 1.0]]]),
        )
        X = np.array([[0.1, 0.2], [1.5, -0.5], [-2.0, 3.0]])
        expected = np.log(
            0.3 * multivariate_normal([0, 0], np.eye(2)).pdf(X)
            + 0.7 * multivariate_normal([1, -1], [[2.0, 0.5], [0.5, 1.0]]).pdf(X)
        )
        assert ubm.loglik(X) == pytest.approx(expected.sum())
        np.testing.assert_allclose(ubm.posteriors(X).sum(axis=1), 1.0)

    def test_write_read(self, test_ubm, test_path):
        filename = f"{test_path}/ubm.fsvm"
        test_ubm.write(filename)
        ubm = GmmUbm.read(filename)
        np.testing.assert_array_equal(ubm.means, test_ubm.means)
        np.testing.assert_array_equal(ubm.covariances, test_ubm.covariances)
        assert ubm.history == test_ubm.history

    def test_str(self, test_ubm):
        assert str(test_ubm).startswith("farfieldsv GmmUbm instance.")


class TestTraining:
    """
    Test the EM training.

    """

    def test_means(self, test_ubm):
        means = test_ubm.means[np.argsort(test_ubm.means[:, 0])]
        np.testing.assert_allclose(means, [[-4.0, 0.0], [4.0, 2.0]], atol=0.15)
        np.testing.assert_allclose(test_ubm.weights, 0.5, atol=0.01)

    def test_monotone(self, test_ubm):
        history = np.array(test_ubm.history)
        assert len(history) == 11
        assert np.all(np.diff(history) >= -1e-6 * np.abs(history[:-1]))

    def test_reproducible(self, test_frames, test_ubm):
        ubm = gmm.ubm_train_em(test_frames, 2, iterations=10, seed=0)
        np.testing.assert_array_equal(ubm.means, test_ubm.means)

    def test_featurematrix_input(self, test_frames):
        features = [FeatureMatrix(frames=f) for f in test_frames]
        ubm = gmm.ubm_train_em(features, 1, iterations=1)
        np.testing.assert_allclose(ubm.means[0], np.vstack(test_frames).mean(axis=0))

    def test_insufficient(self):
        with pytest.raises(InsufficientDataError):
            gmm.ubm_train_em([np.zeros((10, 3))], 2)

    def test_floor(self):
        rng = np.random.default_rng(1)
        X = np.column_stack([rng.normal(size=500), np.zeros(500)])
        with pytest.warns(RuntimeWarning):
            ubm = gmm.ubm_train_em([X], 1, iterations=1)
        assert np.linalg.eigvalsh(ubm.covariances[0]).min() > 0

    def test_floor_covariance(self):
        S, hit = gmm.floor_covariance(np.diag([1.0, 1e-9]), 1e-3)
        assert hit
        np.testing.assert_allclose(S, np.diag([1.0, 1e-3]))
        S, hit = gmm.floor_covariance(np.eye(2), 1e-3)
        assert not hit


class TestBwStats:
    """
    Test the Baum-Welch statistics.

    """

    def test_accumulate(self, test_ubm, test_frames):
        features = FeatureMatrix(frames=test_frames[0], uid="utt")
        stats = gmm.accumulate_bw_stats(test_ubm, features)
        assert stats.uid == "utt"
        assert stats.n_frames == pytest.approx(600)
        np.testing.assert_allclose(stats.first_order.sum(axis=0), test_frames[0].sum(axis=0))

    def test_empty(self, test_ubm):
        stats = gmm.accumulate_bw_stats(test_ubm, np.zeros((0, 2)))
        assert stats.n_frames == 0.0
        assert stats.first_order.shape == (2, 2)

    def test_dimension(self, test_ubm):
        with pytest.raises(DimensionError):
            gmm.accumulate_bw_stats(test_ubm, np.zeros((5, 3)))

    def test_add_and_center(self, test_ubm, test_frames):
        a = gmm.accumulate_bw_stats(test_ubm, test_frames[0])
        b = gmm.accumulate_bw_stats(test_ubm, test_frames[1])
        total = a + b
        assert total.n_frames == pytest.approx(1200)
        centered = total.center(test_ubm)
        assert centered.centered
        assert centered.center(test_ubm) is centered
        np.testing.assert_allclose(
            centered.first_order, total.first_order - total.zero_order[:, None] * test_ubm.means
        )
        with pytest.raises(DimensionError):
            centered + a

    def test_scale(self):
        stats = BwStats(zero_order=np.array([1.0, 2.0]), first_order=np.ones((2, 3)))
        assert stats.scale(0.5).n_frames == pytest.approx(1.5)

    def test_shapes(self):
        with pytest.raises(DimensionError):
            BwStats(zero_order=np.ones(2), first_order=np.ones((3, 3)))

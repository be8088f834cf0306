#!/usr/bin/env python3
"""
test_backend.py

Test the backend.py module.
"""

import numpy as np
import pytest
from scipy.stats import multivariate_normal
from sklearn.exceptions import NotFittedError

from farfieldsv import backend
from farfieldsv.backend import Backend, CoralTransform, PldaModel, Whitener
from farfieldsv.embeddings import Embeddings
from farfieldsv.exceptions import (
    ConfigError,
    DimensionError,
    InsufficientDataError,
    ZeroVectorError,
)


def simulate(n_speakers, sessions, seed, shift=0.0):
    rng = np.random.default_rng(seed)
    F = np.array([[2.0, 0.0], [0.0, 1.5], [1.0, 1.0], [0.0, 0.0], [0.5, -1.0]])
    X, labels = list(), list()
    for s in range(n_speakers):
        h = rng.normal(size=2)
        for _ in range(sessions):
            X.append(F @ h + 0.5 * rng.normal(size=5) + shift)
            labels.append(f"{seed}-s{s}")
    return np.array(X), labels


@pytest.fixture(scope="module")
def test_train():
    X, labels = simulate(30, 6, seed=0)
    uids = [f"u{i:03d}" for i in range(len(X))]
    return Embeddings(
        data={uid: x for uid, x in zip(uids, X)}, uids=uids, speakers=dict(zip(uids, labels))
    )


@pytest.fixture(scope="module")
def test_plda(test_train):
    return backend.plda_train_em(test_train.matrix(), test_train.labels(), 2, iterations=10)


@pytest.fixture(scope="module")
def test_path(tmp_path_factory):
    return tmp_path_factory.mktemp("test_backend")


class TestCoral:
    """
    Test CoralTransform class.

    """

    def test_aligns(self):
        rng = np.random.default_rng(1)
        source = rng.normal(size=(400, 3)) @ np.diag([3.0, 1.0, 0.2])
        target = rng.normal(size=(300, 3)) @ np.array([[1.0, 0.5, 0.0], [0.0, 1.0, 0.0], [0.0, 0.3, 2.0]])
        coral = backend.coral_fit(source, target)
        assert coral.residual() < 1e-10
        assert not coral.degenerate_

    def test_identity(self):
        C = np.array([[2.0, 0.3], [0.3, 1.0]])
        coral = CoralTransform.from_covariances(C, C)
        np.testing.assert_allclose(coral.A_, np.eye(2), atol=1e-12)
        np.testing.assert_allclose(coral.transform(np.array([1.0, 2.0])), [[1.0, 2.0]])

    def test_degenerate(self):
        rng = np.random.default_rng(2)
        with pytest.warns(RuntimeWarning):
            coral = CoralTransform().fit(rng.normal(size=(3, 5)), rng.normal(size=(20, 5)))
        assert coral.degenerate_
        assert np.all(np.isfinite(coral.A_))

    def test_dimension(self):
        with pytest.raises(DimensionError):
            CoralTransform().fit(np.ones((5, 2)), np.ones((5, 3)))

    def test_not_fitted(self):
        with pytest.raises(NotFittedError):
            CoralTransform().transform(np.ones((2, 2)))


class TestWhitening:
    """
    Test whitening and length normalization.

    """

    def test_whitens(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(500, 3)) @ np.array([[2.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.5, 0.3]]) + 4.0
        Y = Whitener().fit(X).transform(X)
        np.testing.assert_allclose(Y.mean(axis=0), 0.0, atol=1e-10)
        np.testing.assert_allclose(np.cov(Y.T, bias=True), np.eye(3), atol=1e-10)

    def test_rank_deficient(self):
        X = np.column_stack([np.arange(10.0), np.zeros(10)])
        with pytest.warns(RuntimeWarning):
            whitener = Whitener().fit(X)
        assert np.all(np.isfinite(whitener.transform(X)))

    def test_insufficient(self):
        with pytest.raises(InsufficientDataError):
            Whitener().fit(np.ones((1, 3)))

    def test_length_normalize(self):
        Y = backend.length_normalize(np.array([[3.0, 4.0], [0.0, 2.0]]))
        np.testing.assert_allclose(Y, [[0.6, 0.8], [0.0, 1.0]])
        with pytest.raises(ZeroVectorError):
            backend.length_normalize(np.zeros((1, 2)))

    def test_whiten_and_lnorm(self):
        rng = np.random.default_rng(4)
        whitener = Whitener().fit(rng.normal(size=(50, 3)))
        y = backend.whiten_and_lnorm(whitener, np.array([1.0, 2.0, 3.0]))
        assert y.shape == (3,)
        assert np.linalg.norm(y) == pytest.approx(1.0)


class TestCosine:
    """
    Test cosine scoring.

    """

    def test_score(self):
        assert backend.cosine_score([1.0, 0.0], [1.0, 1.0]) == pytest.approx(np.sqrt(0.5))
        assert backend.cosine_score([1.0, 2.0], [-2.0, -4.0]) == pytest.approx(-1.0)

    def test_errors(self):
        with pytest.raises(ZeroVectorError):
            backend.cosine_score([0.0, 0.0], [1.0, 0.0])
        with pytest.raises(DimensionError):
            backend.cosine_score([1.0], [1.0, 0.0])

    def test_scores(self):
        E = np.array([[1.0, 0.0], [0.0, 2.0]])
        T = np.array([[2.0, 0.0], [1.0, 0.0]])
        np.testing.assert_allclose(backend.cosine_scores(E, T), [1.0, 0.0])


class TestPlda:
    """
    Test PldaModel class and its training.

    """

    def test_shapes(self):
        with pytest.raises(DimensionError):
            PldaModel(mu=np.zeros(3), F=np.zeros((2, 1)), Sigma=np.eye(3))

    def test_llr(self):
        model = PldaModel(
            mu=np.array([1.0, 0.0]), F=np.array([[1.0], [0.5]]), Sigma=np.array([[0.5, 0.1], [0.1, 0.3]])
        )
        e, t = np.array([1.5, 0.2]), np.array([0.3, -0.4])
        across = model.F @ model.F.T
        total = across + model.Sigma
        same = np.block([[total, across], [across, total]])
        diff = np.block([[total, np.zeros((2, 2))], [np.zeros((2, 2)), total]])
        x = np.concatenate([e, t])
        mu = np.concatenate([model.mu, model.mu])
        expected = multivariate_normal(mu, same).logpdf(x) - multivariate_normal(mu, diff).logpdf(x)
        assert backend.plda_llr(model, e, t) == pytest.approx(expected)
        assert backend.plda_llr(model, t, e) == pytest.approx(expected)

    def test_llr_shapes(self, test_plda):
        with pytest.raises(DimensionError):
            backend.plda_llr(test_plda, np.zeros(5), np.zeros(4))

    def test_history(self, test_plda):
        history = np.array(test_plda.history)
        assert len(history) == 11
        assert np.all(np.diff(history) >= -1e-6 * np.abs(history[:-1]))

    def test_loglik(self, test_plda, test_train):
        assert test_plda.loglik(test_train.matrix(), test_train.labels()) == pytest.approx(test_plda.history[-1])

    def test_discriminates(self, test_plda):
        X, labels = simulate(10, 4, seed=9)
        same = [test_plda.score(X[i], X[i + 1])[0] for i in range(0, 40, 4)]
        different = [test_plda.score(X[i], X[i + 4])[0] for i in range(0, 36, 4)]
        assert np.mean(same) > np.mean(different)

    def test_errors(self, test_train):
        X, labels = test_train.matrix(), test_train.labels()
        with pytest.raises(ConfigError):
            backend.plda_train_em(X, labels, 6)
        with pytest.raises(InsufficientDataError):
            backend.plda_train_em(X, ["one"] * len(X), 2)
        with pytest.raises(InsufficientDataError):
            backend.plda_train_em(X[:4], ["a", "b", "c", "d"], 2)
        with pytest.raises(DimensionError):
            backend.plda_train_em(X, labels[:-1], 2)

    def test_write_read(self, test_plda, test_path):
        filename = f"{test_path}/plda.fsvm"
        test_plda.write(filename)
        model = PldaModel.read(filename)
        np.testing.assert_array_equal(model.F, test_plda.F)
        np.testing.assert_array_equal(model.Sigma, test_plda.Sigma)
        assert model.history == test_plda.history


class TestBackend:
    """
    Test Backend class.

    """

    @pytest.mark.parametrize(
        "keywords,name",
        [
            ({}, "W+plda"),
            ({"coral": True, "whitening": "dev", "scoring": "cosine"}, "coral+devW+cosine"),
            ({"whitening": None, "scoring": "cosine"}, "cosine"),
        ],
    )
    def test_name(self, keywords, name):
        assert Backend(**keywords).name == name

    def test_params(self):
        assert set(Backend().get_params()) == {
            "coral", "whitening", "lnorm", "scoring", "plda_rank", "plda_iterations", "alpha_ratio",
        }

    def test_errors(self, test_train):
        with pytest.raises(ConfigError):
            Backend(scoring="svm").fit(test_train)
        with pytest.raises(ConfigError):
            Backend(whitening="eval").fit(test_train)
        with pytest.raises(InsufficientDataError):
            Backend(coral=True).fit(test_train)
        with pytest.raises(NotFittedError):
            Backend().score_pairs(np.ones((1, 5)), np.ones((1, 5)))

    @pytest.mark.parametrize(
        "keywords",
        [
            {"scoring": "cosine"},
            {"scoring": "plda", "plda_rank": 2},
            {"coral": True, "whitening": "dev", "scoring": "plda", "plda_rank": 2},
        ],
    )
    def test_scores(self, keywords, test_train):
        X, labels = simulate(12, 5, seed=11, shift=0.5)
        uids = [f"a{i:03d}" for i in range(len(X))]
        adapt = Embeddings(data=dict(zip(uids, X)), uids=uids, speakers=dict(zip(uids, labels)))

        fitted = Backend(**keywords).fit(test_train, adapt)
        E = np.array([X[i] for i in range(0, 60, 5)])
        same = fitted.score_pairs(E, np.array([X[i + 1] for i in range(0, 60, 5)]))
        different = fitted.score_pairs(E[:-1], np.array([X[i + 6] for i in range(0, 55, 5)]))
        assert same.shape == (12,)
        assert np.mean(same) > np.mean(different)

    def test_cosine_without_whitening(self):
        fitted = Backend(whitening=None, scoring="cosine").fit(Embeddings())
        np.testing.assert_allclose(fitted.score_pairs(np.array([[1.0, 0.0]]), np.array([[3.0, 0.0]])), [1.0])

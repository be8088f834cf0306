#!/usr/bin/env python3
"""
backend.py

Embedding-space back-end: correlation alignment (CORAL) of out-of-domain
embeddings, whitening and length normalization, Gaussian PLDA with a full
covariance residual, and cosine scoring. Transforms follow the
scikit-learn estimator protocol.

"""

from __future__ import annotations

import warnings
from typing import Optional, Sequence

import numpy as np
from scipy import linalg  # type: ignore
from sklearn.base import BaseEstimator, TransformerMixin  # type: ignore
from sklearn.exceptions import NotFittedError  # type: ignore

from farfieldsv.container import read_container, write_container
from farfieldsv.embeddings import Embeddings
from farfieldsv.exceptions import (
    ConfigError,
    DimensionError,
    InsufficientDataError,
    ZeroVectorError,
)
from farfieldsv.suite import Suite

message = Suite.message

SECTION = "Plda"
VERSION = "1.0"

RIDGE = 1e-3


def _covariance(X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(X)
    Xc = X - X.mean(axis=0)
    return Xc.T @ Xc / X.shape[0]


def _sym_power(C: np.ndarray, power: float) -> np.ndarray:
    vals, vecs = linalg.eigh(0.5 * (C + C.T))
    return (vecs * vals**power) @ vecs.T


class CoralTransform(BaseEstimator, TransformerMixin):
    """
    Correlation alignment A = C_S^{-1/2} C_T^{1/2} of source-domain
    embeddings to a target domain. Both covariances get the ridge
    α = alpha_ratio · trace(C)/D.

    """

    def __init__(self, alpha_ratio: float = RIDGE) -> None:
        self.alpha_ratio = alpha_ratio

    def fit(self, X: np.ndarray, target: np.ndarray) -> CoralTransform:
        """
        Parameters:
            X : ndarray
                Source (out-of-domain) embeddings, N × D.
            target : ndarray
                Target (in-domain) embeddings, M × D.

        """
        X = np.atleast_2d(X)
        target = np.atleast_2d(target)
        if X.shape[1] != target.shape[1]:
            raise DimensionError(f"source {X.shape} and target {target.shape} dimensions differ")

        D = X.shape[1]
        C_S, C_T = _covariance(X), _covariance(target)

        self.source_alpha_ = self.alpha_ratio * np.trace(C_S) / D
        self.target_alpha_ = self.alpha_ratio * np.trace(C_T) / D
        self.degenerate_ = min(X.shape[0], target.shape[0]) <= D

        if self.degenerate_:
            warnings.warn(
                f"CORAL covariances from {X.shape[0]}/{target.shape[0]} vectors in {D} "
                "dimensions rely on the ridge",
                RuntimeWarning,
            )

        self._set(C_S + self.source_alpha_ * np.eye(D), C_T + self.target_alpha_ * np.eye(D))

        return self

    def _set(self, C_S: np.ndarray, C_T: np.ndarray) -> None:
        self.source_cov_ = C_S
        self.target_cov_ = C_T
        self.A_ = _sym_power(C_S, -0.5) @ _sym_power(C_T, 0.5)

    @classmethod
    def from_covariances(
        cls, C_S: np.ndarray, C_T: np.ndarray, alpha: float = 0.0
    ) -> CoralTransform:
        """
        Transform between two given covariances with an absolute ridge.

        """
        C_S = np.atleast_2d(C_S)
        C_T = np.atleast_2d(C_T)
        D = C_S.shape[0]
        coral = cls(alpha_ratio=0.0)
        coral.source_alpha_ = coral.target_alpha_ = alpha
        coral.degenerate_ = False
        coral._set(C_S + alpha * np.eye(D), C_T + alpha * np.eye(D))
        return coral

    def residual(self) -> float:
        """
        ‖Aᵀ C_S A − C_T‖_F / ‖C_T‖_F of the regularized covariances.

        """
        self._check()
        R = self.A_.T @ self.source_cov_ @ self.A_ - self.target_cov_
        return float(np.linalg.norm(R) / np.linalg.norm(self.target_cov_))

    def _check(self) -> None:
        if not hasattr(self, "A_"):
            raise NotFittedError("CoralTransform is not fitted")

    def transform(self, X: np.ndarray) -> np.ndarray:
        self._check()
        return np.atleast_2d(X) @ self.A_


def coral_fit(source: np.ndarray, target: np.ndarray, alpha_ratio: float = RIDGE) -> CoralTransform:
    return CoralTransform(alpha_ratio=alpha_ratio).fit(source, target)


class Whitener(BaseEstimator, TransformerMixin):
    """
    PCA whitening y = W(x − μ). Covariance eigenvalues below
    α = alpha_ratio · trace(C)/D are raised to α.

    """

    def __init__(self, alpha_ratio: float = RIDGE) -> None:
        self.alpha_ratio = alpha_ratio

    def fit(self, X: np.ndarray, y=None) -> Whitener:
        X = np.atleast_2d(X)
        if X.shape[0] < 2:
            raise InsufficientDataError("whitening needs at least 2 vectors")

        D = X.shape[1]
        self.mean_ = X.mean(axis=0)
        C = _covariance(X)
        alpha = self.alpha_ratio * np.trace(C) / D

        vals, vecs = linalg.eigh(C)
        if vals.min() < alpha:
            warnings.warn(
                f"Whitening covariance eigenvalues raised to {alpha:.3g}", RuntimeWarning
            )
            vals = np.maximum(vals, alpha)

        self.transform_ = (vecs / np.sqrt(vals)).T

        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        if not hasattr(self, "transform_"):
            raise NotFittedError("Whitener is not fitted")
        return (np.atleast_2d(X) - self.mean_) @ self.transform_.T


def length_normalize(X: np.ndarray) -> np.ndarray:
    """
    Scale every row to unit norm.

    """
    X = np.atleast_2d(X)
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ZeroVectorError("cannot length-normalize a zero vector")
    return X / norms


def whiten_and_lnorm(transform: Whitener, x: np.ndarray) -> np.ndarray:
    """
    Whitened, unit-length vector(s) W(x − μ)/‖W(x − μ)‖.

    """
    y = length_normalize(transform.transform(x))
    return y[0] if np.ndim(x) == 1 else y


def cosine_score(e: np.ndarray, t: np.ndarray) -> float:
    """
    Cosine similarity of two vectors.

    """
    e = np.asarray(e, dtype=float)
    t = np.asarray(t, dtype=float)
    if e.shape != t.shape:
        raise DimensionError(f"vectors of shapes {e.shape} and {t.shape}")
    ne, nt = np.linalg.norm(e), np.linalg.norm(t)
    if ne == 0 or nt == 0:
        raise ZeroVectorError("cosine score of a zero vector")
    return float(np.dot(e, t) / (ne * nt))


def cosine_scores(E: np.ndarray, T: np.ndarray) -> np.ndarray:
    """
    Row-wise cosine scores of paired enrollment and test matrices.

    """
    E, T = length_normalize(E), length_normalize(T)
    return np.einsum("nd,nd->n", E, T)


class PldaModel:
    """
    farfieldsv PLDA class.
    x = μ + F h + ε with h ~ N(0, I) and ε ~ N(0, Σ), Σ a full covariance.

    """

    def __init__(self, d: Optional[dict] = None, **keywords) -> None:
        """
        Initialize PldaModel class.

        """
        self.__set(d, **keywords)

    def set(self, d: Optional[dict] = None, **keywords) -> None:
        """
        Populate data dictionary.

        """
        self.__set(d, **keywords)

    def __set(self, d: Optional[dict] = None, **keywords) -> None:
        """
        Populate data dictionary helper.

        """
        mu = keywords.get("mu", np.zeros(1))
        F = keywords.get("F", np.zeros((1, 1)))
        Sigma = keywords.get("Sigma", np.eye(1))
        self.history = list(keywords.get("history", list()))

        if isinstance(d, dict):
            if d.get("type", "") == self.__class__.__name__:
                if "mu" not in keywords:
                    mu = d["mu"]
                if "F" not in keywords:
                    F = d["F"]
                if "Sigma" not in keywords:
                    Sigma = d["Sigma"]
                if "history" not in keywords:
                    self.history = list(d["history"])

        self.mu = np.atleast_1d(np.asarray(mu, dtype=float))
        self.F = np.atleast_2d(np.asarray(F, dtype=float))
        self.Sigma = np.atleast_2d(np.asarray(Sigma, dtype=float))

        D = len(self.mu)
        if self.F.shape[0] != D or self.Sigma.shape != (D, D) or self.F.shape[1] > D:
            raise DimensionError(
                f"inconsistent PLDA shapes: mu {self.mu.shape}, F {self.F.shape}, "
                f"Sigma {self.Sigma.shape}"
            )

        # Raises LinAlgError for a non-SPD residual.
        linalg.cholesky(self.Sigma)

        self._prepare_scoring()

    def _prepare_scoring(self) -> None:
        # Two-cover form: [e; t] ~ N(0, S_same) or N(0, S_diff).
        D = len(self.mu)
        across = self.F @ self.F.T
        total = across + self.Sigma
        zero = np.zeros((D, D))
        same = np.block([[total, across], [across, total]])
        diff = np.block([[total, zero], [zero, total]])
        M = np.linalg.inv(same) - np.linalg.inv(diff)
        M = 0.5 * (M + M.T)
        self._Q = M[:D, :D]
        self._P = M[:D, D:]
        self._const = -0.5 * (np.linalg.slogdet(same)[1] - np.linalg.slogdet(diff)[1])

    def get(self) -> dict:
        """
        Return data dictionary with expected keywords.

        """
        return {
            "type": self.__class__.__name__,
            "mu": self.mu,
            "F": self.F,
            "Sigma": self.Sigma,
            "history": self.history,
        }

    def __repr__(self) -> str:
        """
        Class representation.

        """
        return f"{self.__class__.__name__}(dim={self.dim},rank={self.rank})"

    def __str__(self) -> str:
        """
        A description of the instance.
        """

        return f"farfieldsv PldaModel instance.\nrank {self.rank} speaker subspace in {self.dim} dimensions"

    @property
    def dim(self) -> int:
        return len(self.mu)

    @property
    def rank(self) -> int:
        return self.F.shape[1]

    def score(self, E: np.ndarray, T: np.ndarray) -> np.ndarray:
        """
        Row-wise log-likelihood ratios of paired enrollment and test
        matrices.

        """
        E = np.atleast_2d(E)
        T = np.atleast_2d(T)
        if E.shape != T.shape or E.shape[1] != self.dim:
            raise DimensionError(
                f"enrollment {E.shape} and test {T.shape} for a {self.dim}-dimensional PLDA"
            )
        e, t = E - self.mu, T - self.mu
        quad = (
            np.einsum("nd,de,ne->n", e, self._Q, e)
            + np.einsum("nd,de,ne->n", t, self._Q, t)
            + 2.0 * np.einsum("nd,de,ne->n", e, self._P, t)
        )
        return -0.5 * quad + self._const

    def loglik(self, X: np.ndarray, labels: Sequence) -> float:
        """
        Marginal log-likelihood of labelled data, speakers independent.

        """
        return _plda_loglik(self, *_group(X, labels))

    def write(self, filename: str, verbose: bool = False) -> None:
        write_container(
            filename,
            {
                SECTION: {
                    "mu": self.mu,
                    "F": self.F,
                    "Sigma": self.Sigma,
                    "history": np.asarray(self.history, dtype=float),
                }
            },
            {SECTION: VERSION},
            verbose=verbose,
        )

    @classmethod
    def read(cls, filename: str) -> PldaModel:
        arrays = read_container(filename, {SECTION: VERSION})[SECTION]
        return cls(
            mu=arrays["mu"],
            F=arrays["F"],
            Sigma=arrays["Sigma"],
            history=arrays["history"].tolist(),
        )


def plda_llr(model: PldaModel, enroll: np.ndarray, test: np.ndarray) -> float:
    """
    log N([e; t]; μ₂, Σ_same) − log N([e; t]; μ₂, Σ_diff).

    """
    enroll = np.asarray(enroll, dtype=float)
    test = np.asarray(test, dtype=float)
    if enroll.ndim != 1 or enroll.shape != test.shape:
        raise DimensionError(f"vectors of shapes {enroll.shape} and {test.shape}")
    return float(model.score(enroll[None], test[None])[0])


def _group(X: np.ndarray, labels: Sequence) -> tuple[np.ndarray, list[np.ndarray]]:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    labels = list(labels)
    if len(labels) != X.shape[0]:
        raise DimensionError(f"{len(labels)} labels for {X.shape[0]} vectors")
    index: dict = dict()
    for i, label in enumerate(labels):
        index.setdefault(label, list()).append(i)
    return X, [np.array(idx) for idx in index.values()]


def _plda_loglik(model: PldaModel, X: np.ndarray, groups: list[np.ndarray]) -> float:
    D, R = model.dim, model.rank
    cho = linalg.cho_factor(model.Sigma, lower=True)
    logdet_sigma = 2.0 * np.sum(np.log(np.diag(cho[0])))
    SiF = linalg.cho_solve(cho, model.F)
    FtSiF = model.F.T @ SiF
    Xc = X - model.mu
    total = 0.0
    for idx in groups:
        n = len(idx)
        Xs = Xc[idx]
        P = np.eye(R) + n * FtSiF
        b = SiF.T @ Xs.sum(axis=0)
        quad = np.sum(Xs * linalg.cho_solve(cho, Xs.T).T)
        total += -0.5 * (
            n * D * np.log(2.0 * np.pi)
            + n * logdet_sigma
            + np.linalg.slogdet(P)[1]
            + quad
            - b @ np.linalg.solve(P, b)
        )
    return float(total)


def plda_train_em(
    embeddings: np.ndarray,
    speaker_labels: Sequence,
    R_spk: int,
    iterations: int = 10,
    verbose: bool = False,
) -> PldaModel:
    """
    Train a Gaussian PLDA model by EM.

    Parameters:
        embeddings : ndarray
            N × D training vectors.
        speaker_labels : sequence
            Speaker of every vector.
        R_spk : int
            Speaker subspace rank.
        iterations : int

    Returns:
        PldaModel with the log-likelihood history (initial model and after
        every iteration).

    """
    X, groups = _group(embeddings, speaker_labels)
    N, D = X.shape

    if not 1 <= R_spk <= D:
        raise ConfigError(f"Invalid PLDA rank {R_spk} for {D} dimensions")

    if len(groups) < 2:
        raise InsufficientDataError("PLDA training needs at least 2 speakers")

    if max(len(idx) for idx in groups) < 2:
        raise InsufficientDataError("PLDA training needs a speaker with 2 or more sessions")

    mu = X.mean(axis=0)
    Xc = X - mu

    means = np.array([Xc[idx].mean(axis=0) for idx in groups])
    Sb = means.T @ means / len(groups)
    within = np.vstack([Xc[idx] - Xc[idx].mean(axis=0) for idx in groups])
    Sw = within.T @ within / N
    Sw += 1e-10 * np.trace(Sw) / D * np.eye(D)

    vals, vecs = linalg.eigh(Sb, Sw)
    order = np.argsort(vals)[::-1][:R_spk]
    F = Sw @ vecs[:, order] * np.sqrt(np.maximum(vals[order], 0.0))

    model = PldaModel(mu=mu, F=F, Sigma=Sw)
    history = [_plda_loglik(model, X, groups)]

    for i in range(iterations):
        # E-step
        cho = linalg.cho_factor(model.Sigma, lower=True)
        SiF = linalg.cho_solve(cho, model.F)
        FtSiF = model.F.T @ SiF

        XH = np.zeros((D, R_spk))
        HH = np.zeros((R_spk, R_spk))
        H = np.zeros((N, R_spk))
        for idx in groups:
            n = len(idx)
            P = np.eye(R_spk) + n * FtSiF
            cov = np.linalg.inv(P)
            h = cov @ (SiF.T @ Xc[idx].sum(axis=0))
            XH += np.outer(Xc[idx].sum(axis=0), h)
            HH += n * (cov + np.outer(h, h))
            H[idx] = h

        # M-step
        F = linalg.solve(HH, XH.T, assume_a="pos").T
        Sigma = (Xc.T @ Xc - F @ (H.T @ Xc)) / N
        Sigma = 0.5 * (Sigma + Sigma.T)

        model = PldaModel(mu=mu, F=F, Sigma=Sigma)
        history.append(_plda_loglik(model, X, groups))

        if verbose:
            message(f"PLDA EM ITERATION {i + 1}/{iterations}: {history[-1]:.6g}")

    model.history = history

    return model


class Backend(BaseEstimator):
    """
    Back-end chain: optional CORAL of the training embeddings towards the
    adaptation set, optional whitening (statistics of the training or the
    adaptation set), optional length normalization, then PLDA or cosine
    scoring.

    """

    def __init__(
        self,
        coral: bool = False,
        whitening: Optional[str] = "train",
        lnorm: bool = True,
        scoring: str = "plda",
        plda_rank: int = 0,
        plda_iterations: int = 10,
        alpha_ratio: float = RIDGE,
    ) -> None:
        self.coral = coral
        self.whitening = whitening
        self.lnorm = lnorm
        self.scoring = scoring
        self.plda_rank = plda_rank
        self.plda_iterations = plda_iterations
        self.alpha_ratio = alpha_ratio

    @property
    def name(self) -> str:
        parts = list()
        if self.coral:
            parts.append("coral")
        if self.whitening == "dev":
            parts.append("devW")
        elif self.whitening == "train":
            parts.append("W")
        parts.append(self.scoring)
        return "+".join(parts)

    def fit(self, train: Embeddings, adapt: Optional[Embeddings] = None) -> Backend:
        """
        Parameters:
            train : Embeddings
                Out-of-domain training embeddings with speaker labels.
            adapt : Embeddings
                In-domain adaptation embeddings, required by CORAL and
                by development-set whitening.

        """
        if self.scoring not in ("plda", "cosine"):
            raise ConfigError(f"Unknown scoring: {self.scoring}")
        if self.whitening not in (None, "train", "dev"):
            raise ConfigError(f"Unknown whitening statistics: {self.whitening}")
        if (self.coral or self.whitening == "dev") and (adapt is None or len(adapt) == 0):
            raise InsufficientDataError(f"back-end {self.name} needs adaptation embeddings")

        X = train.matrix()

        self.coral_ = None
        if self.coral:
            self.coral_ = CoralTransform(self.alpha_ratio).fit(X, adapt.matrix())
            X = self.coral_.transform(X)

        self.whitener_ = None
        if self.whitening is not None:
            source = X if self.whitening == "train" else adapt.matrix()
            self.whitener_ = Whitener(self.alpha_ratio).fit(source)

        X = self.transform(X)

        self.plda_ = None
        if self.scoring == "plda":
            rank = self.plda_rank or X.shape[1]
            rank = min(rank, X.shape[1])
            self.plda_ = plda_train_em(
                X, train.labels(), rank, iterations=self.plda_iterations
            )

        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        """
        Whitening and length normalization of in-domain embeddings.

        """
        X = np.atleast_2d(X)
        if self.whitener_ is not None:
            X = self.whitener_.transform(X)
        if self.lnorm:
            X = length_normalize(X)
        return X

    def score_pairs(self, E: np.ndarray, T: np.ndarray) -> np.ndarray:
        """
        Scores of paired enrollment and test embedding matrices.

        """
        if not hasattr(self, "whitener_"):
            raise NotFittedError("Backend is not fitted")
        E, T = self.transform(E), self.transform(T)
        if self.scoring == "cosine":
            return cosine_scores(E, T)
        return self.plda_.score(E, T)

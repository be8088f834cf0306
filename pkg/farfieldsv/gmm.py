#!/usr/bin/env python3
"""
gmm.py

Full-covariance Gaussian mixture universal background model (UBM),
trained by expectation maximization, and the Baum-Welch statistics of
utterances on it.

"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Optional, Union

import numpy as np
from scipy import linalg  # type: ignore
from scipy.special import logsumexp  # type: ignore
from sklearn.cluster import kmeans_plusplus  # type: ignore

from farfieldsv.container import read_container, write_container
from farfieldsv.exceptions import DimensionError, InsufficientDataError
from farfieldsv.featurematrix import FeatureMatrix
from farfieldsv.suite import Suite, default_rng

message = Suite.message

SECTION = "GmmUbm"
VERSION = "1.0"

FramesLike = Union[FeatureMatrix, np.ndarray]


def _frames(features: FramesLike) -> np.ndarray:
    if isinstance(features, FeatureMatrix):
        return features.frames
    return np.atleast_2d(np.asarray(features, dtype=float))


class GmmUbm:
    """
    farfieldsv GMM-UBM class.
    Mixture weights, means and full covariance matrices.

    """

    def __init__(self, d: Optional[dict] = None, **keywords) -> None:
        """
        Initialize GmmUbm class.

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
        weights = keywords.get("weights", np.ones(1))
        means = keywords.get("means", np.zeros((1, 1)))
        covariances = keywords.get("covariances", np.ones((1, 1, 1)))
        self.history = list(keywords.get("history", list()))

        if isinstance(d, dict):
            if d.get("type", "") == self.__class__.__name__:
                if "weights" not in keywords:
                    weights = d["weights"]
                if "means" not in keywords:
                    means = d["means"]
                if "covariances" not in keywords:
                    covariances = d["covariances"]
                if "history" not in keywords:
                    self.history = list(d["history"])

        self.weights = np.asarray(weights, dtype=float)
        self.means = np.atleast_2d(np.asarray(means, dtype=float))
        self.covariances = np.asarray(covariances, dtype=float)

        C, D = self.means.shape
        if self.weights.shape != (C,) or self.covariances.shape != (C, D, D):
            raise DimensionError(
                f"inconsistent UBM shapes: weights {self.weights.shape}, "
                f"means {self.means.shape}, covariances {self.covariances.shape}"
            )

        if abs(self.weights.sum() - 1.0) > 1e-10 or np.any(self.weights < 0):
            raise DimensionError("UBM weights must lie on the simplex")

        # Lower Cholesky factors; raises LinAlgError for non-SPD input.
        self._chol = np.array([linalg.cholesky(S, lower=True) for S in self.covariances])

    def get(self) -> dict:
        """
        Return data dictionary with expected keywords.

        """
        return {
            "type": self.__class__.__name__,
            "weights": self.weights,
            "means": self.means,
            "covariances": self.covariances,
            "history": self.history,
        }

    def __repr__(self) -> str:
        """
        Class representation.

        """
        return f"{self.__class__.__name__}(components={self.n_components},dim={self.dim})"

    def __str__(self) -> str:
        """
        A description of the instance.
        """

        return (
            "farfieldsv GmmUbm instance.\n"
            f"{self.n_components} full-covariance components in {self.dim} dimensions"
        )

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def component_loglik(self, X: np.ndarray) -> np.ndarray:
        """
        Weighted component log-densities log w_c + log N(x_t; μ_c, Σ_c).

        Returns:
            T × C array.

        """
        X = np.atleast_2d(X)
        T, D = X.shape
        out = np.empty((T, self.n_components))
        for c in range(self.n_components):
            L = self._chol[c]
            z = linalg.solve_triangular(L, (X - self.means[c]).T, lower=True)
            logdet = 2.0 * np.sum(np.log(np.diag(L)))
            out[:, c] = -0.5 * (D * np.log(2.0 * np.pi) + logdet + np.sum(z**2, axis=0))
        with np.errstate(divide="ignore"):
            return out + np.log(self.weights)

    def posteriors(self, X: np.ndarray) -> np.ndarray:
        """
        Component occupation probabilities, T × C.

        """
        ll = self.component_loglik(X)
        return np.exp(ll - logsumexp(ll, axis=1, keepdims=True))

    def loglik(self, X: np.ndarray) -> float:
        """
        Total log-likelihood of the frames.

        """
        return float(np.sum(logsumexp(self.component_loglik(X), axis=1)))

    def write(self, filename: str, verbose: bool = False) -> None:
        """
        Write the UBM to an FSVM container.

        """
        write_container(
            filename,
            {SECTION: self.arrays()},
            {SECTION: VERSION},
            verbose=verbose,
        )

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "weights": self.weights,
            "means": self.means,
            "covariances": self.covariances,
            "history": np.asarray(self.history, dtype=float),
        }

    @classmethod
    def from_arrays(cls, arrays: dict[str, np.ndarray]) -> GmmUbm:
        return cls(
            weights=arrays["weights"],
            means=arrays["means"],
            covariances=arrays["covariances"],
            history=arrays["history"].tolist(),
        )

    @classmethod
    def read(cls, filename: str) -> GmmUbm:
        """
        Read a UBM from an FSVM container.

        """
        sections = read_container(filename, {SECTION: VERSION})
        return cls.from_arrays(sections[SECTION])


def floor_covariance(S: np.ndarray, floor: float) -> tuple[np.ndarray, bool]:
    """
    Clip the eigenvalues of a symmetric matrix at floor. The matrix is
    returned unchanged when no eigenvalue is below the floor.

    """
    S = 0.5 * (S + S.T)
    vals, vecs = linalg.eigh(S)
    if vals.min() >= floor:
        return S, False
    return (vecs * np.maximum(vals, floor)) @ vecs.T, True


def ubm_train_em(
    features: Iterable[FramesLike],
    C: int,
    iterations: int = 20,
    seed: Optional[int] = 0,
    floor_ratio: float = 1e-4,
    subsample: int = 20000,
    verbose: bool = False,
) -> GmmUbm:
    """
    Train a full-covariance UBM by EM.

    Parameters:
        features : iterable of FeatureMatrix or arrays
            Training utterances; their frames are pooled.
        C : int
            Number of components.
        iterations : int
            EM iterations.
        seed : int
            Seed of the k-means++ initialisation.
        floor_ratio : float
            Covariance eigenvalue floor relative to the mean data variance.
        subsample : int
            Maximum number of frames used for the initialisation.

    Returns:
        GmmUbm with the log-likelihood history (initial model and after
        every M-step).

    """
    X = np.vstack([_frames(f) for f in features])
    T, D = X.shape

    if C < 1:
        raise InsufficientDataError(f"Invalid number of components: {C}")

    if T < 10 * C * D:
        raise InsufficientDataError(
            f"{T} frames for a {C}-component UBM in {D} dimensions, "
            f"need at least {10 * C * D}"
        )

    rng = default_rng(seed)

    global_cov = np.cov(X.T, bias=True).reshape(D, D)
    floor = floor_ratio * float(np.mean(np.diag(global_cov)))

    init = X if T <= subsample else X[rng.choice(T, size=subsample, replace=False)]
    if C == 1:
        means = init.mean(axis=0, keepdims=True)
    else:
        means, _ = kmeans_plusplus(
            init, C, random_state=int(rng.integers(np.iinfo(np.int32).max))
        )

    cov0, _ = floor_covariance(global_cov, floor)
    ubm = GmmUbm(
        weights=np.full(C, 1.0 / C),
        means=means,
        covariances=np.repeat(cov0[None], C, axis=0),
    )

    history = [ubm.loglik(X)]

    for i in range(iterations):
        # E-step
        gamma = ubm.posteriors(X)
        N = gamma.sum(axis=0)

        # M-step
        weights = N / N.sum()
        means = ubm.means.copy()
        covariances = ubm.covariances.copy()
        floored = list()
        for c in range(C):
            if N[c] < 1e-10:
                continue
            means[c] = gamma[:, c] @ X / N[c]
            Xc = X - means[c]
            S = (gamma[:, c, None] * Xc).T @ Xc / N[c]
            covariances[c], hit = floor_covariance(S, floor)
            if hit:
                floored.append(c)

        if floored:
            warnings.warn(
                f"Covariance of UBM component(s) {floored} floored at {floor:.3g}",
                RuntimeWarning,
            )

        ubm = GmmUbm(weights=weights / weights.sum(), means=means, covariances=covariances)
        history.append(ubm.loglik(X))

        if verbose:
            message(f"UBM EM ITERATION {i + 1}/{iterations}: {history[-1]:.6g}")

    ubm.history = history

    return ubm


@dataclass(frozen=True, eq=False)
class BwStats:
    """
    Zero- and first-order Baum-Welch statistics of one utterance.
    ``centered`` flags first-order statistics taken around the UBM means.

    """

    zero_order: np.ndarray
    first_order: np.ndarray
    centered: bool = False
    uid: str = ""

    def __post_init__(self) -> None:
        N = np.asarray(self.zero_order, dtype=float)
        F = np.atleast_2d(np.asarray(self.first_order, dtype=float))
        if F.shape[0] != N.shape[0]:
            raise DimensionError(
                f"zero-order {N.shape} and first-order {F.shape} statistics disagree"
            )
        object.__setattr__(self, "zero_order", N)
        object.__setattr__(self, "first_order", F)

    def __add__(self, other: BwStats) -> BwStats:
        if self.centered != other.centered:
            raise DimensionError("cannot add centered and raw statistics")
        return BwStats(
            zero_order=self.zero_order + other.zero_order,
            first_order=self.first_order + other.first_order,
            centered=self.centered,
            uid=self.uid,
        )

    @property
    def n_frames(self) -> float:
        return float(self.zero_order.sum())

    def scale(self, factor: float) -> BwStats:
        return BwStats(
            zero_order=factor * self.zero_order,
            first_order=factor * self.first_order,
            centered=self.centered,
            uid=self.uid,
        )

    def center(self, ubm: GmmUbm) -> BwStats:
        """
        First-order statistics centered around the UBM means.

        """
        if self.centered:
            return self
        if self.first_order.shape != ubm.means.shape:
            raise DimensionError(
                f"statistics {self.first_order.shape} do not match UBM {ubm.means.shape}"
            )
        return BwStats(
            zero_order=self.zero_order,
            first_order=self.first_order - self.zero_order[:, None] * ubm.means,
            centered=True,
            uid=self.uid,
        )


def accumulate_bw_stats(ubm: GmmUbm, features: FramesLike, uid: str = "") -> BwStats:
    """
    Baum-Welch statistics N_c = Σ_t γ_t(c) and F_c = Σ_t γ_t(c) x_t.

    """
    X = _frames(features)
    if not uid and isinstance(features, FeatureMatrix):
        uid = features.uid

    if X.size == 0:
        return BwStats(
            zero_order=np.zeros(ubm.n_components),
            first_order=np.zeros((ubm.n_components, ubm.dim)),
            uid=uid,
        )

    if X.shape[1] != ubm.dim:
        raise DimensionError(f"{X.shape[1]}-dimensional features for a {ubm.dim}-dimensional UBM")

    gamma = ubm.posteriors(X)

    return BwStats(zero_order=gamma.sum(axis=0), first_order=gamma.T @ X, uid=uid)

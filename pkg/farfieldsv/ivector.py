#!/usr/bin/env python3
"""
ivector.py

Total-variability (single factor analysis) model on the UBM supervector
space: T-matrix EM training and i-vector extraction.

"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from scipy import linalg  # type: ignore

from farfieldsv.container import read_container, write_container
from farfieldsv.embeddings import Embedding
from farfieldsv.exceptions import ConfigError, DimensionError, InsufficientDataError
from farfieldsv.gmm import SECTION as UBM_SECTION
from farfieldsv.gmm import VERSION as UBM_VERSION
from farfieldsv.gmm import BwStats, GmmUbm
from farfieldsv.suite import Suite, default_rng

message = Suite.message

SECTION = "TotalVariability"
VERSION = "1.0"


class TotalVariabilityModel:
    """
    farfieldsv total variability class.
    M_u = m + T w_u with w_u ~ N(0, I); T is stored per component as a
    C × D × R array.

    """

    def __init__(self, d: Optional[dict] = None, **keywords) -> None:
        """
        Initialize TotalVariabilityModel class.

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
        T = keywords.get("T")
        self.ubm = keywords.get("ubm")
        self.history = list(keywords.get("history", list()))

        if isinstance(d, dict):
            if d.get("type", "") == self.__class__.__name__:
                if "T" not in keywords:
                    T = d["T"]
                if "ubm" not in keywords:
                    self.ubm = d["ubm"]
                if "history" not in keywords:
                    self.history = list(d["history"])

        if T is None or not isinstance(self.ubm, GmmUbm):
            raise ConfigError("TotalVariabilityModel needs T and a GmmUbm")

        self.T = np.asarray(T, dtype=float)
        C, D = self.ubm.n_components, self.ubm.dim

        if self.T.ndim != 3 or self.T.shape[:2] != (C, D):
            raise DimensionError(f"T of shape {self.T.shape} does not match UBM ({C}, {D})")

        if not self.rank < C * D:
            raise ConfigError(f"rank {self.rank} must be below the supervector size {C * D}")

        if not np.all(np.isfinite(self.T)):
            raise DimensionError("non-finite total variability matrix")

        # Per component TᵀΣ⁻¹ (R × D) and TᵀΣ⁻¹T (R × R).
        self._TtSi = np.array(
            [linalg.cho_solve((L, True), Tc).T for L, Tc in zip(self.ubm._chol, self.T)]
        )
        self._TtSiT = np.einsum("crd,cds->crs", self._TtSi, self.T)

    def get(self) -> dict:
        """
        Return data dictionary with expected keywords.

        """
        return {
            "type": self.__class__.__name__,
            "T": self.T,
            "ubm": self.ubm,
            "history": self.history,
        }

    def __repr__(self) -> str:
        """
        Class representation.

        """
        return f"{self.__class__.__name__}(rank={self.rank},{self.ubm=})"

    def __str__(self) -> str:
        """
        A description of the instance.
        """

        C, D, R = self.T.shape
        return (
            "farfieldsv TotalVariabilityModel instance.\n"
            f"rank {R} on {C} components of dimension {D}"
        )

    @property
    def rank(self) -> int:
        return self.T.shape[2]

    def matrix(self) -> np.ndarray:
        """
        T as the (C·D) × R supervector matrix.

        """
        C, D, R = self.T.shape
        return self.T.reshape(C * D, R)

    def _stack(self, stats: Sequence[BwStats]) -> tuple[np.ndarray, np.ndarray]:
        C, D = self.ubm.n_components, self.ubm.dim
        N = np.zeros((len(stats), C))
        F = np.zeros((len(stats), C, D))
        for i, s in enumerate(stats):
            if s.first_order.shape != (C, D):
                raise DimensionError(
                    f"statistics {s.first_order.shape} do not match UBM ({C}, {D})"
                )
            s = s.center(self.ubm)
            N[i] = s.zero_order
            F[i] = s.first_order
        return N, F

    def _precision_and_projection(
        self, N: np.ndarray, F: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        # L_u = I + Σ_c N_uc TᵀΣ⁻¹T, b_u = Σ_c TᵀΣ⁻¹ f̃_uc
        L = np.eye(self.rank) + np.einsum("uc,crs->urs", N, self._TtSiT)
        b = np.einsum("crd,ucd->ur", self._TtSi, F)
        return L, b

    def posteriors(self, stats: Sequence[BwStats]) -> tuple[np.ndarray, np.ndarray]:
        """
        Posterior means (U × R) and covariances (U × R × R) of the
        latent factors of several utterances.

        """
        N, F = self._stack(stats)
        L, b = self._precision_and_projection(N, F)
        cov = np.linalg.inv(L)
        cov = 0.5 * (cov + cov.transpose(0, 2, 1))
        w = np.linalg.solve(L, b[..., None])[..., 0]
        return w, cov

    def posterior(self, stats: BwStats) -> tuple[np.ndarray, np.ndarray]:
        """
        Posterior mean and covariance of the latent factor of one
        utterance.

        """
        w, cov = self.posteriors([stats])
        return w[0], cov[0]

    def objective(self, stats: Sequence[BwStats]) -> float:
        """
        Σ_u [-½ log|L_u| + ½ b_uᵀ L_u⁻¹ b_u], the T-dependent part of the
        marginal log-likelihood of the statistics.

        """
        N, F = self._stack(stats)
        L, b = self._precision_and_projection(N, F)
        _, logdet = np.linalg.slogdet(L)
        w = np.linalg.solve(L, b[..., None])[..., 0]
        return float(np.sum(-0.5 * logdet + 0.5 * np.einsum("ur,ur->u", b, w)))

    def write(self, filename: str, verbose: bool = False) -> None:
        """
        Write the model and its UBM to an FSVM container.

        """
        write_container(
            filename,
            {
                UBM_SECTION: self.ubm.arrays(),
                SECTION: {"T": self.T, "history": np.asarray(self.history, dtype=float)},
            },
            {UBM_SECTION: UBM_VERSION, SECTION: VERSION},
            verbose=verbose,
        )

    @classmethod
    def read(cls, filename: str) -> TotalVariabilityModel:
        """
        Read a model written by :meth:`write`.

        """
        sections = read_container(filename, {UBM_SECTION: UBM_VERSION, SECTION: VERSION})
        return cls(
            T=sections[SECTION]["T"],
            ubm=GmmUbm.from_arrays(sections[UBM_SECTION]),
            history=sections[SECTION]["history"].tolist(),
        )


def init_tmatrix(ubm: GmmUbm, R: int, seed: Optional[int] = 0) -> np.ndarray:
    """
    Random initial T: 0.1 · chol(Σ_c) · N(0, 1) per component.

    """
    rng = default_rng(seed, offset=1)
    G = rng.standard_normal((ubm.n_components, ubm.dim, R))
    return 0.1 * np.einsum("cde,cer->cdr", ubm._chol, G)


def train_tmatrix_em(
    ubm: GmmUbm,
    stats: Sequence[BwStats],
    R: int,
    iterations: int = 10,
    seed: Optional[int] = 0,
    min_divergence: bool = True,
    verbose: bool = False,
) -> TotalVariabilityModel:
    """
    Train the total variability matrix by EM.

    Parameters:
        ubm : GmmUbm
        stats : sequence of BwStats
            Training utterance statistics on ubm.
        R : int
            Rank (i-vector dimension).
        iterations : int
        seed : int
        min_divergence : bool
            Apply the minimum-divergence re-estimation after every M-step.

    Returns:
        TotalVariabilityModel with the objective history (initial model
        and after every iteration).

    """
    stats = list(stats)

    if R < 1:
        raise ConfigError(f"Invalid rank: {R}")

    if len(stats) < R:
        raise InsufficientDataError(f"{len(stats)} utterances for a rank {R} model")

    tv = TotalVariabilityModel(T=init_tmatrix(ubm, R, seed), ubm=ubm)
    N, F = tv._stack(stats)

    history = list()

    for i in range(iterations):
        # E-step
        L, b = tv._precision_and_projection(N, F)
        _, logdet = np.linalg.slogdet(L)
        cov = np.linalg.inv(L)
        w = np.linalg.solve(L, b[..., None])[..., 0]
        history.append(float(np.sum(-0.5 * logdet + 0.5 * np.einsum("ur,ur->u", b, w))))

        Eww = cov + np.einsum("ur,us->urs", w, w)
        A = np.einsum("uc,urs->crs", N, Eww)
        Cm = np.einsum("ucd,ur->cdr", F, w)

        # M-step: T_c = C_c A_c⁻¹
        T = np.array([linalg.solve(A[c], Cm[c].T, assume_a="sym").T for c in range(len(A))])

        if min_divergence:
            K = Eww.mean(axis=0)
            T = T @ linalg.cholesky(0.5 * (K + K.T), lower=True)

        tv = TotalVariabilityModel(T=T, ubm=ubm)

        if verbose:
            message(f"T-MATRIX EM ITERATION {i + 1}/{iterations}: {history[-1]:.6g}")

    history.append(tv.objective(stats))
    tv.history = history

    return tv


def extract_ivector(tv: TotalVariabilityModel, stats: BwStats) -> Embedding:
    """
    i-vector w = (I + TᵀΣ⁻¹ÑT)⁻¹ TᵀΣ⁻¹f̃, the posterior mean of the
    latent factor.

    """
    w, _ = tv.posterior(stats)
    return Embedding(vector=w, extractor="ivector", uid=stats.uid)

#!/usr/bin/env python3
"""
embedder.py

Toy neural speaker embedder: a frame-level encoder, statistics pooling,
a linear embedding layer and a speaker classifier trained with softmax
or angular-margin softmax (A-softmax) cross-entropy. Gradients are
analytic; training is plain minibatch SGD.

"""

from __future__ import annotations

import copy
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from numpy.polynomial import chebyshev  # type: ignore
from scipy.special import log_softmax, softmax  # type: ignore

from farfieldsv.container import array_text, read_container, text_array, write_container
from farfieldsv.embeddings import Embedding
from farfieldsv.exceptions import (
    ConfigError,
    DimensionError,
    DivergenceError,
    InsufficientDataError,
    TooShortError,
    ZeroVectorError,
)
from farfieldsv.featurematrix import FeatureMatrix
from farfieldsv.suite import Suite, default_rng

message = Suite.message

SECTION = "ToyEmbedNet"
VERSION = "1.0"

POOLINGS = ("mean", "mean_std")
LOSSES = ("softmax", "asoftmax")
PARAMS = ("W1", "b1", "W2", "b2", "We", "be", "Wc")

FramesLike = Union[FeatureMatrix, np.ndarray]


def _frames(features: FramesLike) -> np.ndarray:
    if isinstance(features, FeatureMatrix):
        return features.frames
    return np.atleast_2d(np.asarray(features, dtype=float))


@dataclass(frozen=True)
class AsoftmaxConfig:
    """
    Angular margin m and the annealing weight λ of the target logit
    blend ψ' = (λ cosθ + ψ(θ)) / (1 + λ).

    """

    margin: int = 4
    lambda_: float = 0.0

    def __post_init__(self) -> None:
        if int(self.margin) != self.margin or self.margin < 1:
            raise ConfigError(f"Invalid angular margin: {self.margin}")
        if self.lambda_ < 0:
            raise ConfigError(f"Invalid annealing weight: {self.lambda_}")


@dataclass(frozen=True)
class TrainConfig:
    """
    SGD settings. With ``anneal`` the A-softmax weight follows
    λ = max(lambda_min, lambda_max · lambda_decay^step).

    """

    learning_rate: float = 0.01
    steps: int = 200
    batch_size: int = 16
    loss: str = "asoftmax"
    margin: int = 4
    seed: Optional[int] = 0
    anneal: bool = True
    lambda_min: float = 5.0
    lambda_max: float = 1000.0
    lambda_decay: float = 0.99

    def __post_init__(self) -> None:
        if self.loss not in LOSSES:
            raise ConfigError(f"Unknown loss: {self.loss}")
        if self.learning_rate < 0:
            raise ConfigError(f"Invalid learning rate: {self.learning_rate}")
        if self.steps < 0 or self.batch_size < 1:
            raise ConfigError(f"Invalid steps/batch size: {self.steps}/{self.batch_size}")
        AsoftmaxConfig(margin=self.margin)

    def asoftmax(self, step: int) -> AsoftmaxConfig:
        """
        A-softmax configuration at a training step.

        """
        lam = 0.0
        if self.anneal:
            lam = max(self.lambda_min, self.lambda_max * self.lambda_decay**step)
        return AsoftmaxConfig(margin=self.margin, lambda_=lam)


def stats_pool(H: np.ndarray, pooling: str = "mean_std") -> np.ndarray:
    """
    Pool frame-level outputs over time.

    Parameters:
        H : ndarray
            T × H frame outputs.
        pooling : str
            ``mean`` gives the column means, ``mean_std`` the means followed
            by the population standard deviations.

    """
    H = np.atleast_2d(H)
    if pooling not in POOLINGS:
        raise ConfigError(f"Unknown pooling: {pooling}")
    if H.shape[0] == 0:
        raise TooShortError("cannot pool zero frames")

    mu = H.mean(axis=0)
    if pooling == "mean":
        return mu

    if H.shape[0] == 1:
        warnings.warn("Standard deviation of a single frame set to zero", RuntimeWarning)

    return np.concatenate([mu, np.sqrt(np.mean((H - mu) ** 2, axis=0))])


def _pool_backward(H: np.ndarray, pooled: np.ndarray, dp: np.ndarray, pooling: str) -> np.ndarray:
    T, n = H.shape
    dH = np.repeat(dp[None, :n] / T, T, axis=0)
    if pooling == "mean_std":
        sigma = pooled[n:]
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.where(sigma > 0, dp[n:] / (T * sigma), 0.0)
        dH += (H - pooled[:n]) * g
    return dH


def _check_labels(labels: np.ndarray, S: int, B: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    if labels.shape != (B,):
        raise DimensionError(f"{labels.shape[0]} labels for {B} embeddings")
    if np.any(labels < 0) or np.any(labels >= S):
        raise DimensionError(f"labels outside [0, {S})")
    return labels


def _cross_entropy(Z: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    B = Z.shape[0]
    loss = -float(np.mean(log_softmax(Z, axis=1)[np.arange(B), labels]))
    G = softmax(Z, axis=1)
    G[np.arange(B), labels] -= 1.0
    return loss, G / B


def softmax_loss(
    X: np.ndarray, labels: np.ndarray, W: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """
    Mean cross-entropy of the bias-free logits X Wᵀ.

    Returns:
        Loss, gradient w.r.t. X (B × E) and w.r.t. W (S × E).

    """
    X = np.atleast_2d(X)
    W = np.atleast_2d(W)
    if X.shape[1] != W.shape[1]:
        raise DimensionError(f"embeddings {X.shape} and classifier {W.shape} disagree")
    labels = _check_labels(labels, W.shape[0], X.shape[0])

    loss, G = _cross_entropy(X @ W.T, labels)

    return loss, G @ W, G.T @ X


def psi(theta: np.ndarray, m: int) -> np.ndarray:
    """
    Monotone angular margin function (-1)^k cos(mθ) - 2k for
    θ in [kπ/m, (k+1)π/m].

    """
    theta = np.asarray(theta, dtype=float)
    k = np.clip(np.floor(theta * m / np.pi), 0, m - 1)
    return (-1.0) ** k * np.cos(m * theta) - 2.0 * k


def _target(X: np.ndarray, Wy: np.ndarray, config: AsoftmaxConfig):
    # Target logit r ψ'(c) through c = cosθ, with ψ(θ) = (-1)^k T_m(c) - 2k.
    m, lam = int(config.margin), config.lambda_
    r = np.linalg.norm(X, axis=1)
    if np.any(r == 0):
        raise ZeroVectorError("zero-norm embedding has no angle")

    c = np.einsum("be,be->b", X, Wy) / r
    k = np.clip(np.floor(np.arccos(np.clip(c, -1.0, 1.0)) * m / np.pi), 0, m - 1)
    sign = (-1.0) ** k

    coef = np.zeros(m + 1)
    coef[m] = 1.0
    psi_c = sign * chebyshev.chebval(c, coef) - 2.0 * k
    dpsi_c = sign * chebyshev.chebval(c, chebyshev.chebder(coef))

    blend = (lam * c + psi_c) / (1.0 + lam)
    dblend = (lam + dpsi_c) / (1.0 + lam)

    return r, c, blend, dblend


def asoftmax_logits(X: np.ndarray, labels: np.ndarray, W: np.ndarray, config: AsoftmaxConfig) -> np.ndarray:
    """
    Logits ‖x‖cosθ_j with the target entry replaced by ‖x‖ψ'(θ_y).

    """
    X = np.atleast_2d(X)
    labels = _check_labels(labels, W.shape[0], X.shape[0])
    r, _, blend, _ = _target(X, W[labels], config)
    Z = X @ W.T
    Z[np.arange(len(X)), labels] = r * blend
    return Z


def asoftmax_loss(
    X: np.ndarray,
    labels: np.ndarray,
    W: np.ndarray,
    config: Optional[AsoftmaxConfig] = None,
) -> tuple[float, np.ndarray, np.ndarray]:
    """
    A-softmax cross-entropy. Classifier rows are expected unit norm and
    the embeddings are not normalized.

    Returns:
        Loss, gradient w.r.t. X (B × E) and w.r.t. W (S × E).

    """
    config = config or AsoftmaxConfig()
    X = np.atleast_2d(X)
    W = np.atleast_2d(W)
    if X.shape[1] != W.shape[1]:
        raise DimensionError(f"embeddings {X.shape} and classifier {W.shape} disagree")
    B = X.shape[0]
    labels = _check_labels(labels, W.shape[0], B)

    Wy = W[labels]
    r, c, blend, dblend = _target(X, Wy, config)

    Z = X @ W.T
    Z[np.arange(B), labels] = r * blend

    loss, G = _cross_entropy(Z, labels)

    Gt = G[np.arange(B), labels].copy()
    G[np.arange(B), labels] = 0.0

    dfdx = blend[:, None] * X / r[:, None] + dblend[:, None] * (Wy - c[:, None] * X / r[:, None])
    dfdw = dblend[:, None] * X

    dX = G @ W + Gt[:, None] * dfdx
    dW = G.T @ X
    np.add.at(dW, labels, Gt[:, None] * dfdw)

    return loss, dX, dW


class ToyEmbedNet:
    """
    farfieldsv toy embedder class.
    Two affine+ReLU frame layers, statistics pooling, a linear embedding
    layer and a bias-free speaker classifier.

    """

    def __init__(self, d: Optional[dict] = None, **keywords) -> None:
        """
        Initialize ToyEmbedNet class.

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
        self.input_dim = keywords.get("input_dim", 60)
        self.hidden = keywords.get("hidden", 64)
        self.embed_dim = keywords.get("embed_dim", 256)
        self.n_speakers = keywords.get("n_speakers", 2)
        self.pooling = keywords.get("pooling", "mean_std")
        self.speakers = list(keywords.get("speakers", list()))
        self.history = list(keywords.get("history", list()))
        params = keywords.get("params")
        seed = keywords.get("seed", 0)

        if isinstance(d, dict):
            if d.get("type", "") == self.__class__.__name__:
                for key in (
                    "input_dim", "hidden", "embed_dim", "n_speakers",
                    "pooling", "speakers", "history",
                ):
                    if key not in keywords:
                        setattr(self, key, d[key])
                if "params" not in keywords:
                    params = d["params"]

        if self.pooling not in POOLINGS:
            raise ConfigError(f"Unknown pooling: {self.pooling}")

        if self.n_speakers < 2:
            raise InsufficientDataError("the classifier needs at least 2 speakers")

        self.params = self._init_params(seed) if params is None else {
            key: np.array(params[key], dtype=float) for key in PARAMS
        }

        expected = self.shapes()
        for key in PARAMS:
            if self.params[key].shape != expected[key]:
                raise DimensionError(
                    f"parameter {key} of shape {self.params[key].shape}, expected {expected[key]}"
                )

    def get(self) -> dict:
        """
        Return data dictionary with expected keywords.

        """
        return {
            "type": self.__class__.__name__,
            "input_dim": self.input_dim,
            "hidden": self.hidden,
            "embed_dim": self.embed_dim,
            "n_speakers": self.n_speakers,
            "pooling": self.pooling,
            "speakers": self.speakers,
            "history": self.history,
            "params": self.params,
        }

    def __repr__(self) -> str:
        """
        Class representation.

        """
        return (
            f"{self.__class__.__name__}({self.input_dim=},{self.hidden=},"
            f"{self.embed_dim=},{self.n_speakers=},{self.pooling=})"
        )

    def __str__(self) -> str:
        """
        A description of the instance.
        """

        return (
            "farfieldsv ToyEmbedNet instance.\n"
            f"{self.input_dim} -> {self.hidden} -> {self.hidden} -> "
            f"{self.pooling} -> {self.embed_dim} -> {self.n_speakers} speakers"
        )

    @property
    def pooled_dim(self) -> int:
        return self.hidden * (2 if self.pooling == "mean_std" else 1)

    def shapes(self) -> dict[str, tuple]:
        H, E = self.hidden, self.embed_dim
        return {
            "W1": (H, self.input_dim),
            "b1": (H,),
            "W2": (H, H),
            "b2": (H,),
            "We": (E, self.pooled_dim),
            "be": (E,),
            "Wc": (self.n_speakers, E),
        }

    def _init_params(self, seed: Optional[int]) -> dict[str, np.ndarray]:
        rng = default_rng(seed, offset=2)
        params = dict()
        for key, shape in self.shapes().items():
            if len(shape) == 1:
                params[key] = np.zeros(shape)
            else:
                params[key] = rng.standard_normal(shape) * np.sqrt(2.0 / shape[1])
        params["Wc"] /= np.linalg.norm(params["Wc"], axis=1, keepdims=True)
        return params

    def normalize_classifier(self) -> None:
        """
        Scale the classifier rows to unit norm.

        """
        self.params["Wc"] /= np.linalg.norm(self.params["Wc"], axis=1, keepdims=True)

    def encode(self, X: np.ndarray) -> tuple[np.ndarray, tuple]:
        """
        Frame-level encoder outputs and the activations needed for
        backpropagation.

        """
        p = self.params
        Z1 = X @ p["W1"].T + p["b1"]
        H1 = np.maximum(Z1, 0.0)
        Z2 = H1 @ p["W2"].T + p["b2"]
        H2 = np.maximum(Z2, 0.0)
        return H2, (X, Z1, H1, Z2)

    def forward(self, features: FramesLike) -> tuple[np.ndarray, tuple]:
        """
        Embedding of a full-length utterance with the backpropagation cache.

        """
        X = _frames(features)
        if X.size == 0:
            raise TooShortError("cannot embed an utterance without frames")
        if X.shape[1] != self.input_dim:
            raise DimensionError(f"{X.shape[1]}-dimensional features for a {self.input_dim}-input net")
        H2, acts = self.encode(X)
        pooled = stats_pool(H2, self.pooling)
        e = self.params["We"] @ pooled + self.params["be"]
        return e, (acts, H2, pooled)

    def embed(self, features: FramesLike) -> np.ndarray:
        return self.forward(features)[0]

    def predict(self, features: Sequence[FramesLike]) -> np.ndarray:
        """
        Classifier decision (speaker index) of every utterance.

        """
        E = np.vstack([self.embed(f) for f in features])
        return np.argmax(E @ self.params["Wc"].T, axis=1)

    def _backward(self, cache: tuple, de: np.ndarray, grads: dict) -> None:
        (X, Z1, H1, Z2), H2, pooled = cache
        p = self.params
        grads["We"] += np.outer(de, pooled)
        grads["be"] += de
        dp = p["We"].T @ de
        dZ2 = _pool_backward(H2, pooled, dp, self.pooling) * (Z2 > 0)
        grads["W2"] += dZ2.T @ H1
        grads["b2"] += dZ2.sum(axis=0)
        dZ1 = (dZ2 @ p["W2"]) * (Z1 > 0)
        grads["W1"] += dZ1.T @ X
        grads["b1"] += dZ1.sum(axis=0)

    def loss_and_gradients(
        self,
        batch: Sequence[FramesLike],
        labels: np.ndarray,
        loss: str = "softmax",
        config: Optional[AsoftmaxConfig] = None,
    ) -> tuple[float, dict[str, np.ndarray]]:
        """
        Mean loss of a minibatch and its gradient w.r.t. every parameter.

        """
        outputs = [self.forward(f) for f in batch]
        E = np.vstack([e for e, _ in outputs])

        if loss == "softmax":
            value, dE, dWc = softmax_loss(E, labels, self.params["Wc"])
        elif loss == "asoftmax":
            value, dE, dWc = asoftmax_loss(E, labels, self.params["Wc"], config)
        else:
            raise ConfigError(f"Unknown loss: {loss}")

        grads = {key: np.zeros_like(v) for key, v in self.params.items()}
        grads["Wc"] = dWc
        for (_, cache), de in zip(outputs, dE):
            self._backward(cache, de, grads)

        return value, grads

    def write(self, filename: str, verbose: bool = False) -> None:
        """
        Write the network to an FSVM container.

        """
        arrays = dict(self.params)
        arrays["dims"] = np.array(
            [self.input_dim, self.hidden, self.embed_dim, self.n_speakers], dtype=np.int64
        )
        arrays["pooling"] = text_array(self.pooling)
        arrays["speakers"] = text_array("\n".join(self.speakers))
        arrays["history"] = np.asarray(self.history, dtype=float)
        write_container(filename, {SECTION: arrays}, {SECTION: VERSION}, verbose=verbose)

    @classmethod
    def read(cls, filename: str) -> ToyEmbedNet:
        """
        Read a network written by :meth:`write`.

        """
        arrays = read_container(filename, {SECTION: VERSION})[SECTION]
        input_dim, hidden, embed_dim, n_speakers = (int(v) for v in arrays["dims"])
        speakers = array_text(arrays["speakers"])
        return cls(
            input_dim=input_dim,
            hidden=hidden,
            embed_dim=embed_dim,
            n_speakers=n_speakers,
            pooling=array_text(arrays["pooling"]),
            speakers=speakers.split("\n") if speakers else list(),
            history=arrays["history"].tolist(),
            params={key: arrays[key] for key in PARAMS},
        )

    def plot(self, **keywords) -> None:
        """
        Plot the training loss curve.

        """
        import matplotlib.pyplot as plt  # type: ignore

        _, ax = plt.subplots()
        ax.plot(np.arange(1, len(self.history) + 1), self.history, color="tab:blue")
        ax.set_xlabel("step")
        ax.set_ylabel("loss")
        ax.set_title(keywords.get("title", "training loss"))

        if keywords.get("save"):
            plt.savefig(keywords["save"])
            plt.close()
        elif keywords.get("show", False):
            plt.show()


def train_toy(
    net: ToyEmbedNet,
    features: Sequence[FramesLike],
    labels: Sequence,
    config: Optional[TrainConfig] = None,
    verbose: bool = False,
) -> ToyEmbedNet:
    """
    Train a copy of the network by minibatch SGD.

    Parameters:
        net : ToyEmbedNet
            Initial network; left untouched.
        features : sequence of FeatureMatrix or arrays
            Training utterances.
        labels : sequence
            Speaker label of every utterance.
        config : TrainConfig

    Returns:
        Trained ToyEmbedNet with the loss of every step in history.

    """
    config = config or TrainConfig()

    if len(features) != len(labels):
        raise DimensionError(f"{len(features)} utterances and {len(labels)} labels")

    speakers = sorted(set(labels))
    if len(speakers) < 2:
        raise InsufficientDataError("training needs at least 2 speakers")
    if len(speakers) != net.n_speakers:
        raise DimensionError(f"{len(speakers)} speakers for a {net.n_speakers}-way classifier")

    index = {s: i for i, s in enumerate(speakers)}
    y = np.array([index[s] for s in labels])

    net = copy.deepcopy(net)
    net.speakers = [str(s) for s in speakers]
    net.history = list()

    if config.loss == "asoftmax":
        net.normalize_classifier()

    rng = default_rng(config.seed, offset=3)
    batch_size = min(config.batch_size, len(features))
    last = None

    for step in range(config.steps):
        idx = rng.choice(len(features), size=batch_size, replace=False)
        value, grads = net.loss_and_gradients(
            [features[i] for i in idx], y[idx], config.loss, config.asoftmax(step)
        )

        if not np.isfinite(value):
            raise DivergenceError(step, last)

        for key in PARAMS:
            net.params[key] -= config.learning_rate * grads[key]

        if config.loss == "asoftmax":
            net.normalize_classifier()

        net.history.append(value)
        last = value

        if verbose and (step + 1) % max(1, config.steps // 10) == 0:
            message(f"EMBEDDER STEP {step + 1}/{config.steps}: LOSS {value:.4f}")

    return net


def extract_embedding(net: ToyEmbedNet, features: FramesLike, uid: str = "") -> Embedding:
    """
    Embedding-layer output for the full, untruncated utterance.

    """
    if not uid and isinstance(features, FeatureMatrix):
        uid = features.uid
    return Embedding(vector=net.embed(features), extractor=f"toy-{net.pooling}", uid=uid)

#!/usr/bin/env python3
"""
dereverb.py

Single-channel weighted prediction error (WPE) dereverberation in the
STFT domain. Every frequency bin is an independent delayed linear
prediction problem solved by iteratively reweighted least squares.

"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import signal  # type: ignore

from farfieldsv import dsp
from farfieldsv.audio import AudioBuffer
from farfieldsv.exceptions import ConfigError, DimensionError, TooShortError

LAMBDA_FLOOR = 1e-10


@dataclass(frozen=True)
class WpeConfig:
    """
    WPE settings. ``taps=0`` gives the identity transform.

    """

    taps: int = 10
    delay: int = 3
    iterations: int = 3
    regularization: float = 1e-6
    win: float = 0.032
    shift: float = 0.008
    n_fft: Optional[int] = None

    def __post_init__(self) -> None:
        if self.taps < 0:
            raise ConfigError(f"Invalid number of taps: {self.taps}")
        if self.delay < 1:
            raise ConfigError(f"Invalid prediction delay: {self.delay}")
        if self.iterations < 1:
            raise ConfigError(f"Invalid number of iterations: {self.iterations}")
        if not self.regularization > 0:
            raise ConfigError(f"Invalid regularization: {self.regularization}")
        if not 0 < self.shift <= self.win:
            raise ConfigError(f"Invalid STFT window/shift: {self.win}/{self.shift}")

    def stft_params(self, sample_rate: int) -> tuple[int, int, int]:
        """
        Window length, hop and FFT size in samples.

        """
        nperseg = int(round(self.win * sample_rate))
        hop = int(round(self.shift * sample_rate))
        n_fft = self.n_fft or dsp.next_pow2(nperseg)
        if n_fft < nperseg:
            raise ConfigError(f"n_fft {n_fft} shorter than window {nperseg}")
        return nperseg, hop, n_fft


def _sqrt_hann(nperseg: int) -> np.ndarray:
    return np.sqrt(signal.get_window("hann", nperseg))


def stft(audio: AudioBuffer, config: WpeConfig) -> np.ndarray:
    """
    Complex STFT, frequency × frames.

    """
    nperseg, hop, n_fft = config.stft_params(audio.sample_rate)
    _, _, Y = signal.stft(
        audio.samples,
        fs=audio.sample_rate,
        window=_sqrt_hann(nperseg),
        nperseg=nperseg,
        noverlap=nperseg - hop,
        nfft=n_fft,
        boundary="zeros",
        padded=True,
    )
    return Y


def istft(Y: np.ndarray, config: WpeConfig, sample_rate: int, length: int) -> np.ndarray:
    """
    Overlap-add inverse of :func:`stft`, trimmed to length samples.

    """
    nperseg, hop, n_fft = config.stft_params(sample_rate)
    _, x = signal.istft(
        Y,
        fs=sample_rate,
        window=_sqrt_hann(nperseg),
        nperseg=nperseg,
        noverlap=nperseg - hop,
        nfft=n_fft,
        boundary=True,
    )
    x = x[:length]
    if len(x) < length:
        x = np.pad(x, (0, length - len(x)))
    return x


def tap_stack(Y: np.ndarray, taps: int, delay: int) -> np.ndarray:
    """
    Delayed tap-stacked observations: out[f, k, t] = Y[f, t - delay - k]
    (zero before the first frame).

    """
    F, T = Y.shape
    stacked = np.zeros((F, taps, T), dtype=Y.dtype)
    for k in range(taps):
        d = k + delay
        if d >= T:
            break
        stacked[:, k, d:] = Y[:, :T - d]
    return stacked


def wpe_objective(estimate: np.ndarray) -> float:
    """
    Σ (|d|²/λ + log λ) with λ = max(|d|², floor), summed over bins and
    frames.

    """
    power = np.abs(estimate) ** 2
    lam = np.maximum(power, LAMBDA_FLOOR)
    return float(np.sum(power / lam + np.log(lam)))


def wpe_iterate_once(
    stft_obs: np.ndarray, current_estimate: np.ndarray, config: WpeConfig
) -> tuple[np.ndarray, np.ndarray]:
    """
    One WPE update: variances from the current estimate, then the
    per-bin prediction filters and the new estimate.

    Parameters:
        stft_obs : ndarray
            Observed STFT, frequency × frames.
        current_estimate : ndarray
            Current dereverberated STFT, same shape.
        config : WpeConfig

    Returns:
        Filters (frequency × taps) and the new estimate.

    """
    Y = np.atleast_2d(stft_obs)
    D = np.atleast_2d(current_estimate)

    if Y.shape != D.shape:
        raise DimensionError(
            f"observation {Y.shape} and estimate {D.shape} shapes differ"
        )

    F, _ = Y.shape
    K = config.taps

    if K == 0:
        return np.zeros((F, 0), dtype=Y.dtype), Y.copy()

    lam = np.maximum(np.abs(D) ** 2, LAMBDA_FLOOR)

    Yt = tap_stack(Y, K, config.delay)
    Yn = Yt / lam[:, None, :]

    # F x K x K and F x K
    R = np.matmul(Yn, Yt.conj().transpose(0, 2, 1))
    r = np.einsum("fkt,ft->fk", Yn, Y.conj())

    power = np.real(np.trace(R, axis1=1, axis2=2)) / K
    eps = config.regularization * np.maximum(power, LAMBDA_FLOOR)
    R = R + eps[:, None, None] * np.eye(K)

    G = np.linalg.solve(R, r[..., None])[..., 0]

    estimate = Y - np.einsum("fk,fkt->ft", G.conj(), Yt)

    return G, estimate


def wpe_dereverberate(
    audio: AudioBuffer, config: Optional[WpeConfig] = None, history: Optional[list] = None
) -> AudioBuffer:
    """
    Dereverberate a single-channel recording.

    Parameters:
        audio : AudioBuffer
        config : WpeConfig
        history : list
            When given, receives the objective of the observation and the
            objective after every iteration.

    Returns:
        Dereverberated audio of the same length and rate.

    """
    config = config or WpeConfig()

    Y = stft(audio, config)

    if Y.shape[1] < config.taps + config.delay + 2:
        raise TooShortError(
            f"audio '{audio.uid}' gives {Y.shape[1]} STFT frames, "
            f"WPE needs at least {config.taps + config.delay + 2}"
        )

    D = Y
    if history is not None:
        history.append(wpe_objective(D))

    for _ in range(config.iterations):
        _, D = wpe_iterate_once(Y, D, config)
        if history is not None:
            history.append(wpe_objective(D))

    x = istft(D, config, audio.sample_rate, len(audio))

    return audio.copy(samples=x)

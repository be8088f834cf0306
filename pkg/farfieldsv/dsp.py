#!/usr/bin/env python3
"""
dsp.py

Signal primitives shared by the feature extractors: framing, windowing,
power spectra, mel and gammatone filterbanks, the orthonormal DCT,
regression deltas, sliding cepstral mean subtraction and resampling.

All functions are pure.

"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import fft, signal  # type: ignore

from farfieldsv.audio import AudioBuffer
from farfieldsv.exceptions import ConfigError, NonFiniteError, TooShortError
from farfieldsv.featurematrix import FeatureMatrix

LOG_FLOOR = 1e-10

WINDOWS = {"hamming": "hamming", "hann": "hann", "rectangular": "boxcar"}


def next_pow2(n: int) -> int:
    """
    Smallest power of two greater than or equal to n.

    """
    return 1 << max(int(n) - 1, 0).bit_length()


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / 2595.0) - 1.0)


def hz_to_erb(f):
    """
    ERB-rate (number of ERBs below f).

    """
    return 21.4 * np.log10(1.0 + 4.37e-3 * np.asarray(f, dtype=float))


def erb_to_hz(e):
    return (10.0 ** (np.asarray(e, dtype=float) / 21.4) - 1.0) / 4.37e-3


def erb_bandwidth(f):
    """
    Equivalent rectangular bandwidth at f Hz.

    """
    return 24.7 * (4.37e-3 * np.asarray(f, dtype=float) + 1.0)


@dataclass(frozen=True)
class FilterbankSpec:
    """
    Filterbank geometry.

    """

    n_filters: int
    f_min: float
    f_max: float
    warp: str = "mel"
    n_fft: int = 512
    sample_rate: int = 16000
    order: int = 4
    bandwidth: float = 1.019

    def __post_init__(self) -> None:
        if self.warp not in ("mel", "gammatone"):
            raise ConfigError(f"Unknown filterbank warp: {self.warp}")
        if self.n_filters < 1:
            raise ConfigError("Expecting at least one filter")
        if self.f_max > self.sample_rate / 2:
            raise ConfigError(
                f"f_max {self.f_max} Hz above Nyquist {self.sample_rate / 2} Hz"
            )
        if not 0 <= self.f_min < self.f_max:
            raise ConfigError(f"Invalid band [{self.f_min}, {self.f_max}] Hz")
        if self.n_fft < 2:
            raise ConfigError(f"Invalid n_fft: {self.n_fft}")

    def bin_frequencies(self) -> np.ndarray:
        return np.arange(self.n_fft // 2 + 1) * self.sample_rate / self.n_fft

    def center_frequencies(self) -> np.ndarray:
        """
        Centre frequency of every filter in Hz.

        """
        if self.warp == "mel":
            edges = mel_to_hz(
                np.linspace(hz_to_mel(self.f_min), hz_to_mel(self.f_max), self.n_filters + 2)
            )
            return edges[1:-1]
        if self.n_filters == 1:
            return np.array([erb_to_hz(0.5 * (hz_to_erb(self.f_min) + hz_to_erb(self.f_max)))])
        return erb_to_hz(
            np.linspace(hz_to_erb(self.f_min), hz_to_erb(self.f_max), self.n_filters)
        )


def frame_and_window(
    audio: AudioBuffer,
    win_len: float = 0.025,
    shift: float = 0.010,
    window: str = "hamming",
    preemphasis: float = 0.0,
) -> np.ndarray:
    """
    Cut the audio into overlapping frames and apply the window.

    Parameters:
        audio : AudioBuffer
        win_len, shift : float
            Window length and shift in seconds.
        window : str
            'hamming', 'hann' or 'rectangular'.
        preemphasis : float
            First-order pre-emphasis coefficient applied before framing.

    Returns:
        Frame matrix, one windowed frame per row.

    """
    if not shift > 0 or win_len < shift:
        raise ConfigError(f"Expecting win_len >= shift > 0, got {win_len}, {shift}")
    if window not in WINDOWS:
        raise ConfigError(f"Unknown window: {window}")

    L = int(round(win_len * audio.sample_rate))
    S = int(round(shift * audio.sample_rate))
    x = audio.samples

    if len(x) < L:
        raise TooShortError(
            f"audio '{audio.uid}' has {len(x)} samples, fewer than one window of {L}"
        )

    if preemphasis:
        x = np.append(x[0], x[1:] - preemphasis * x[:-1])

    frames = np.lib.stride_tricks.sliding_window_view(x, L)[::S]

    return frames * signal.get_window(WINDOWS[window], L, fftbins=False)


def power_spectrum(frames: np.ndarray, n_fft: Optional[int] = None) -> np.ndarray:
    """
    |DFT|² of every frame, zero-padded to n_fft (default: next power of
    two of the frame length).

    """
    frames = np.atleast_2d(frames)
    if not np.all(np.isfinite(frames)):
        raise NonFiniteError("Non-finite frames")

    if n_fft is None:
        n_fft = next_pow2(frames.shape[1])
    if n_fft < frames.shape[1]:
        raise ConfigError(f"n_fft {n_fft} shorter than frame length {frames.shape[1]}")

    return np.abs(np.fft.rfft(frames, n=n_fft, axis=1)) ** 2


def build_filterbank(spec: FilterbankSpec) -> np.ndarray:
    """
    Filterbank weight matrix, one filter per row over the n_fft/2+1 bins.

    Mel filters are unit-peak triangles equally spaced on the mel scale;
    gammatone filters sample the power response of an order-n gammatone
    filter on ERB-spaced centre frequencies.

    """
    f = spec.bin_frequencies()

    if spec.warp == "mel":
        edges = mel_to_hz(
            np.linspace(hz_to_mel(spec.f_min), hz_to_mel(spec.f_max), spec.n_filters + 2)
        )
        lo, cf, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
        rising = (f - lo) / (cf - lo)
        falling = (hi - f) / (hi - cf)
        return np.maximum(0.0, np.minimum(rising, falling))

    cf = spec.center_frequencies()[:, None]
    b = spec.bandwidth * erb_bandwidth(cf)
    return (1.0 + ((f - cf) / b) ** 2) ** (-spec.order)


def dct2_matrix(n_filters: int, n_ceps: int) -> np.ndarray:
    """
    Orthonormal DCT-II basis, n_ceps rows of length n_filters.

    """
    if n_ceps > n_filters:
        raise ConfigError(f"n_ceps {n_ceps} exceeds n_filters {n_filters}")
    return fft.dct(np.eye(n_filters), type=2, norm="ortho", axis=0)[:n_ceps]


def dct2_orthonormal(log_energies: np.ndarray, n_ceps: int) -> np.ndarray:
    """
    Orthonormal type-II DCT along the last axis, keeping n_ceps
    coefficients.

    """
    log_energies = np.asarray(log_energies, dtype=float)
    if n_ceps > log_energies.shape[-1]:
        raise ConfigError(
            f"n_ceps {n_ceps} exceeds n_filters {log_energies.shape[-1]}"
        )
    return fft.dct(log_energies, type=2, norm="ortho", axis=-1)[..., :n_ceps]


def log_floor(x: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(x, LOG_FLOOR))


def deltas(features: np.ndarray, context_window: int = 2) -> np.ndarray:
    """
    Regression deltas over ±context_window frames with edge replication.

    """
    if context_window < 1:
        raise ConfigError(f"Invalid delta context window: {context_window}")

    features = np.asarray(features, dtype=float)
    N = context_window
    T = features.shape[0]
    padded = np.pad(features, ((N, N), (0, 0)), mode="edge")
    num = sum(n * (padded[N + n:N + n + T] - padded[N - n:N - n + T]) for n in range(1, N + 1))
    return num / (2.0 * sum(n * n for n in range(1, N + 1)))


def append_deltas(features: np.ndarray, context_window: int = 2) -> np.ndarray:
    """
    Stack [static | Δ | ΔΔ].

    """
    d1 = deltas(features, context_window)
    d2 = deltas(d1, context_window)
    return np.hstack([np.asarray(features, dtype=float), d1, d2])


def sliding_cms(
    features: Union[np.ndarray, FeatureMatrix],
    window_seconds: float = 3.0,
    frame_shift: float = 0.010,
):
    """
    Sliding cepstral mean subtraction over a centred window truncated at
    the utterance edges. Utterances no longer than the window get the
    global mean removed.

    Parameters:
        features : ndarray or FeatureMatrix
            A FeatureMatrix brings its own frame shift and is returned as
            a FeatureMatrix.
        window_seconds : float
        frame_shift : float
            Frame shift in seconds, used for arrays.

    """
    if not window_seconds > 0:
        raise ConfigError(f"Invalid CMS window: {window_seconds}")

    if isinstance(features, FeatureMatrix):
        normalized = sliding_cms(features.frames, window_seconds, features.frame_shift)
        return features.copy(frames=normalized)

    x = np.asarray(features, dtype=float)
    T = x.shape[0]
    W = max(int(round(window_seconds / frame_shift)), 1)

    if T <= W:
        return x - x.mean(axis=0)

    csum = np.vstack([np.zeros((1, x.shape[1])), np.cumsum(x, axis=0)])
    start = np.clip(np.arange(T) - W // 2, 0, T)
    stop = np.clip(np.arange(T) - W // 2 + W, 0, T)
    means = (csum[stop] - csum[start]) / (stop - start)[:, None]
    return x - means


def resample_to_8k(audio: AudioBuffer, numtaps: int = 161) -> AudioBuffer:
    """
    Decimate 16 kHz audio to 8 kHz with a windowed-sinc polyphase filter
    (cutoff 3.6 kHz, Kaiser window).

    """
    if audio.sample_rate != 16000:
        raise ConfigError(f"resample_to_8k expects 16000 Hz input, got {audio.sample_rate}")

    h = signal.firwin(numtaps, 0.45 * 8000, window=("kaiser", 8.6), fs=audio.sample_rate)
    y = signal.resample_poly(audio.samples, 1, 2, window=h)

    return AudioBuffer(samples=y, sample_rate=8000, uid=audio.uid)

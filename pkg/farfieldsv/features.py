#!/usr/bin/env python3
"""
features.py

Front-end feature extractors: MFCC, PNCC, log Mel-filterbank and log
Gammatone-filterbank energies.

"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from farfieldsv import dsp
from farfieldsv.audio import AudioBuffer
from farfieldsv.exceptions import ConfigError
from farfieldsv.featurematrix import KIND_DIMS, FeatureMatrix

PRESETS: dict[str, dict] = {
    "mfcc20": dict(
        sample_rate=16000, n_filters=23, n_ceps=20, f_min=20.0, f_max=7600.0,
        deltas=True, preemphasis=0.97, warp="mel",
    ),
    "mfcc30": dict(
        sample_rate=16000, n_filters=30, n_ceps=30, f_min=20.0, f_max=7600.0,
        deltas=False, preemphasis=0.97, warp="mel",
    ),
    "pncc": dict(
        sample_rate=16000, n_filters=40, n_ceps=20, f_min=200.0, f_max=8000.0,
        deltas=True, preemphasis=0.97, warp="gammatone",
    ),
    "mfbank16k": dict(
        sample_rate=16000, n_filters=64, n_ceps=None, f_min=20.0, f_max=7600.0,
        deltas=False, preemphasis=0.0, warp="mel",
    ),
    "mfbank8k": dict(
        sample_rate=8000, n_filters=64, n_ceps=None, f_min=20.0, f_max=3800.0,
        deltas=False, preemphasis=0.0, warp="mel",
    ),
    "gfbank": dict(
        sample_rate=16000, n_filters=64, n_ceps=None, f_min=50.0, f_max=8000.0,
        deltas=False, preemphasis=0.0, warp="gammatone",
    ),
}

# PNCC constants.
MEDIUM_TIME_FRAMES = 2
LAMBDA_A = 0.999
LAMBDA_B = 0.5
LAMBDA_T = 0.85
MU_T = 0.2
EXCITATION_RATIO = 2.0
SMOOTHING_CHANNELS = 4
LAMBDA_MU = 0.999
POWER_LAW = 1.0 / 15.0
POWER_FLOOR = 1e-20


@dataclass(frozen=True)
class FeatureConfig:
    """
    Feature extraction settings. Use :meth:`preset` for the kind defaults.

    """

    kind: str
    sample_rate: int
    n_filters: int
    n_ceps: Optional[int]
    f_min: float
    f_max: float
    deltas: bool
    preemphasis: float
    warp: str
    cms_window: Optional[float] = 3.0
    delta_window: int = 2
    win_len: float = 0.025
    shift: float = 0.010
    window: str = "hamming"

    def __post_init__(self) -> None:
        if self.kind not in PRESETS:
            raise ConfigError(f"Unknown feature kind: {self.kind}")
        if self.kind in ("mfcc20", "pncc") and not self.deltas:
            raise ConfigError(f"{self.kind} requires deltas")
        if self.kind not in ("mfcc20", "pncc") and self.deltas:
            raise ConfigError(f"{self.kind} carries no deltas")
        if self.kind == "mfbank8k" and self.sample_rate != 8000:
            raise ConfigError("mfbank8k requires 8000 Hz audio")
        if self.kind != "mfbank8k" and self.sample_rate != 16000:
            raise ConfigError(f"{self.kind} requires 16000 Hz audio")
        if self.n_ceps is not None and self.n_ceps > self.n_filters:
            raise ConfigError(f"n_ceps {self.n_ceps} exceeds n_filters {self.n_filters}")
        if self.dim != KIND_DIMS[self.kind]:
            raise ConfigError(
                f"{self.kind} must be {KIND_DIMS[self.kind]}-dimensional, settings give {self.dim}"
            )
        if self.cms_window is not None and self.cms_window < 0:
            raise ConfigError(f"Invalid CMS window: {self.cms_window}")

    @classmethod
    def preset(cls, kind: str, **overrides) -> FeatureConfig:
        """
        Default configuration of a feature kind.

        """
        if kind not in PRESETS:
            raise ConfigError(f"Unknown feature kind: {kind}")
        return cls(kind=kind, **{**PRESETS[kind], **overrides})

    def with_options(self, **overrides) -> FeatureConfig:
        return replace(self, **overrides)

    @property
    def dim(self) -> int:
        base = self.n_ceps if self.n_ceps is not None else self.n_filters
        return 3 * base if self.deltas else base

    @property
    def n_fft(self) -> int:
        return dsp.next_pow2(int(round(self.win_len * self.sample_rate)))

    def filterbank(self) -> dsp.FilterbankSpec:
        return dsp.FilterbankSpec(
            n_filters=self.n_filters,
            f_min=self.f_min,
            f_max=self.f_max,
            warp=self.warp,
            n_fft=self.n_fft,
            sample_rate=self.sample_rate,
        )


def _check(audio: AudioBuffer, config: FeatureConfig, kinds: tuple) -> None:
    if config.kind not in kinds:
        raise ConfigError(f"Expecting a {'/'.join(kinds)} configuration, got {config.kind}")
    if audio.sample_rate != config.sample_rate:
        raise ConfigError(
            f"{config.kind} expects {config.sample_rate} Hz audio, "
            f"'{audio.uid}' is {audio.sample_rate} Hz"
        )


def _spectrum(audio: AudioBuffer, config: FeatureConfig) -> np.ndarray:
    frames = dsp.frame_and_window(
        audio, config.win_len, config.shift, config.window, config.preemphasis
    )
    return dsp.power_spectrum(frames, config.n_fft)


def _finish(static: np.ndarray, config: FeatureConfig, uid: str) -> FeatureMatrix:
    x = dsp.append_deltas(static, config.delta_window) if config.deltas else static
    if config.cms_window:
        x = dsp.sliding_cms(x, config.cms_window, config.shift)
    return FeatureMatrix(frames=x, frame_shift=config.shift, feature_kind=config.kind, uid=uid)


def extract_mfcc(audio: AudioBuffer, config: Optional[FeatureConfig] = None) -> FeatureMatrix:
    """
    MFCCs: pre-emphasis, Hamming frames, mel filterbank, floored log,
    orthonormal DCT, deltas (mfcc20) and sliding CMS.

    """
    config = config or FeatureConfig.preset("mfcc20")
    _check(audio, config, ("mfcc20", "mfcc30"))

    energies = _spectrum(audio, config) @ dsp.build_filterbank(config.filterbank()).T
    static = dsp.dct2_orthonormal(dsp.log_floor(energies), config.n_ceps)

    return _finish(static, config, audio.uid)


def extract_logmel(audio: AudioBuffer, config: Optional[FeatureConfig] = None) -> FeatureMatrix:
    """
    64 log Mel-filterbank energies with sliding CMS.

    """
    config = config or FeatureConfig.preset("mfbank16k")
    _check(audio, config, ("mfbank8k", "mfbank16k"))

    energies = _spectrum(audio, config) @ dsp.build_filterbank(config.filterbank()).T

    return _finish(dsp.log_floor(energies), config, audio.uid)


def extract_gfbank(audio: AudioBuffer, config: Optional[FeatureConfig] = None) -> FeatureMatrix:
    """
    64 log Gammatone-filterbank energies with sliding CMS.

    """
    config = config or FeatureConfig.preset("gfbank")
    _check(audio, config, ("gfbank",))

    return _finish(dsp.log_floor(gammatone_power(audio, config)), config, audio.uid)


def gammatone_power(audio: AudioBuffer, config: FeatureConfig) -> np.ndarray:
    """
    Short-time power integrated by the gammatone channels, T×channels.

    """
    return _spectrum(audio, config) @ dsp.build_filterbank(config.filterbank()).T


def _running_window_mean(x: np.ndarray, half: int) -> np.ndarray:
    T = x.shape[0]
    csum = np.vstack([np.zeros((1, x.shape[1])), np.cumsum(x, axis=0)])
    start = np.clip(np.arange(T) - half, 0, T)
    stop = np.clip(np.arange(T) + half + 1, 0, T)
    return (csum[stop] - csum[start]) / (stop - start)[:, None]


def medium_time_power(power: np.ndarray, M: int = MEDIUM_TIME_FRAMES) -> np.ndarray:
    """
    Average over the 2M+1 neighbouring frames, truncated at the edges.

    """
    return _running_window_mean(np.asarray(power, dtype=float), M)


def asymmetric_lowpass(
    q: np.ndarray, lambda_a: float = LAMBDA_A, lambda_b: float = LAMBDA_B
) -> np.ndarray:
    """
    Asymmetric first-order lowpass: slow rise (lambda_a), fast fall
    (lambda_b). Starts at 0.9 times the first frame.

    """
    out = np.empty_like(q)
    out[0] = 0.9 * q[0]
    for m in range(1, q.shape[0]):
        prev = out[m - 1]
        out[m] = np.where(
            q[m] >= prev,
            lambda_a * prev + (1.0 - lambda_a) * q[m],
            lambda_b * prev + (1.0 - lambda_b) * q[m],
        )
    return out


def temporal_masking(
    q0: np.ndarray, lambda_t: float = LAMBDA_T, mu_t: float = MU_T
) -> np.ndarray:
    """
    Suppress power that falls below the decaying peak envelope.

    """
    out = np.empty_like(q0)
    peak = q0[0].copy()
    out[0] = q0[0]
    for m in range(1, q0.shape[0]):
        decayed = lambda_t * peak
        out[m] = np.where(q0[m] >= decayed, q0[m], mu_t * peak)
        peak = np.maximum(decayed, q0[m])
    return out


def noise_suppression(power: np.ndarray) -> np.ndarray:
    """
    Asymmetric noise-floor subtraction, half-wave rectification and
    temporal masking on medium-time power, turned into a gain smoothed
    across channels and applied to the short-time power.

    """
    qt = medium_time_power(power)
    qle = asymmetric_lowpass(qt)
    q0 = np.maximum(qt - qle, 0.0)
    qf = asymmetric_lowpass(q0)
    rsp = temporal_masking(q0)

    r = np.where(qt >= EXCITATION_RATIO * qle, rsp, qf)
    gain = r / np.maximum(qt, POWER_FLOOR)

    smoothed = _running_window_mean(gain.T, SMOOTHING_CHANNELS).T

    return power * smoothed


def power_normalize(power: np.ndarray, lambda_mu: float = LAMBDA_MU) -> np.ndarray:
    """
    Divide by a running mean of the frame power.

    """
    frame_power = power.mean(axis=1)
    mu = np.empty_like(frame_power)
    if len(mu):
        mu[0] = frame_power[0]
    for m in range(1, len(mu)):
        mu[m] = lambda_mu * mu[m - 1] + (1.0 - lambda_mu) * frame_power[m]
    return power / np.maximum(mu, POWER_FLOOR)[:, None]


def extract_pncc(
    audio: AudioBuffer,
    config: Optional[FeatureConfig] = None,
    suppression: bool = True,
    nonlinearity: str = "power",
    normalization: Optional[bool] = None,
) -> FeatureMatrix:
    """
    Power-normalized cepstral coefficients.

    Parameters:
        audio : AudioBuffer
        config : FeatureConfig
            pncc configuration.
        suppression : bool
            Apply the asymmetric noise suppression and temporal masking.
        nonlinearity : str
            'power' for x^(1/15), 'log' for the floored log.
        normalization : bool
            Divide by the running mean power before the nonlinearity.
            Defaults to on with the power law and off with the log, where
            suppression=False and nonlinearity='log' reduce to the log
            gammatone cepstrum.

    """
    config = config or FeatureConfig.preset("pncc")
    _check(audio, config, ("pncc",))

    if nonlinearity not in ("power", "log"):
        raise ConfigError(f"Unknown nonlinearity: {nonlinearity}")

    power = gammatone_power(audio, config)

    if suppression:
        power = noise_suppression(power)

    if normalization is None:
        normalization = nonlinearity == "power"

    u = power_normalize(power) if normalization else power

    compressed = u**POWER_LAW if nonlinearity == "power" else dsp.log_floor(u)

    static = dsp.dct2_orthonormal(compressed, config.n_ceps)

    return _finish(static, config, audio.uid)


EXTRACTORS = {
    "mfcc20": extract_mfcc,
    "mfcc30": extract_mfcc,
    "pncc": extract_pncc,
    "mfbank8k": extract_logmel,
    "mfbank16k": extract_logmel,
    "gfbank": extract_gfbank,
}


def extract(audio: AudioBuffer, config: FeatureConfig) -> FeatureMatrix:
    """
    Run the extractor matching the configuration kind.

    """
    return EXTRACTORS[config.kind](audio, config)

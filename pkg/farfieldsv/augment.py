#!/usr/bin/env python3
"""
augment.py

Far-field data simulation: image-source room impulse responses for
rectangular rooms, RIR convolution, additive noise at a target SNR and
synthetic speech-like test signals.

"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import signal  # type: ignore

from farfieldsv.audio import AudioBuffer
from farfieldsv.exceptions import ConfigError, FormatError, SilentSignalError
from farfieldsv.suite import Suite, default_rng

message = Suite.message

FRACTIONAL_TAPS = 81
SABINE = 0.161

# (F1, F2, F3) in Hz of five reference vowels
VOWELS = (
    (730.0, 1090.0, 2440.0),
    (270.0, 2290.0, 3010.0),
    (530.0, 1840.0, 2480.0),
    (570.0, 840.0, 2410.0),
    (300.0, 870.0, 2240.0),
)


@dataclass(frozen=True)
class RoomSpec:
    """
    Shoebox room with uniform wall absorption, one omnidirectional
    source and one microphone.

    """

    dimensions: tuple[float, float, float] = (6.0, 5.0, 3.0)
    absorption: float = 0.4
    source: tuple[float, float, float] = (1.5, 1.5, 1.5)
    mic: tuple[float, float, float] = (4.0, 3.0, 1.2)
    max_order: int = 10
    sample_rate: int = 16000
    c: float = 343.0
    length: Optional[float] = None

    def __post_init__(self) -> None:
        for name in ("dimensions", "source", "mic"):
            value = tuple(float(v) for v in getattr(self, name))
            if len(value) != 3:
                raise ConfigError(f"{name} must have three coordinates, got {len(value)}")
            object.__setattr__(self, name, value)

        L = np.array(self.dimensions)
        if np.any(L <= 0):
            raise ConfigError(f"Invalid room dimensions: {self.dimensions}")
        if not 0.0 < self.absorption <= 1.0:
            raise ConfigError(f"Absorption must lie in (0, 1], got {self.absorption}")
        for name in ("source", "mic"):
            p = np.array(getattr(self, name))
            if np.any(p <= 0) or np.any(p >= L):
                raise ConfigError(f"{name} {getattr(self, name)} is not strictly inside the room")
        if self.max_order < 0:
            raise ConfigError(f"Invalid reflection order: {self.max_order}")
        if not self.sample_rate > 0:
            raise ConfigError(f"Invalid sample rate: {self.sample_rate}")
        if not self.c > 0:
            raise ConfigError(f"Invalid speed of sound: {self.c}")
        if self.length is not None and not self.length > 0:
            raise ConfigError(f"Invalid RIR length: {self.length}")

    @property
    def beta(self) -> float:
        """
        Pressure reflection coefficient of every wall.

        """
        return float(np.sqrt(1.0 - self.absorption))

    def distance(self) -> float:
        return float(np.linalg.norm(np.subtract(self.source, self.mic)))

    def t60(self) -> float:
        """
        Sabine reverberation time in seconds.

        """
        Lx, Ly, Lz = self.dimensions
        volume = Lx * Ly * Lz
        surface = 2.0 * (Lx * Ly + Lx * Lz + Ly * Lz)
        return SABINE * volume / (surface * self.absorption)

    def to_json(self, filename: str) -> None:
        with open(filename, "w") as f:
            json.dump(asdict(self), f, indent=2)
            f.write("\n")

    @classmethod
    def from_json(cls, filename: str) -> RoomSpec:
        """
        Read a room document written by :meth:`to_json`.

        """
        try:
            with open(filename) as f:
                document = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"{filename}: {e}") from e
        try:
            return cls(**document)
        except TypeError as e:
            raise ConfigError(f"{filename}: {e}") from e


def sabine_absorption(dimensions: tuple[float, float, float], t60: float) -> float:
    """
    Uniform absorption giving the requested Sabine reverberation time.

    """
    Lx, Ly, Lz = dimensions
    volume = Lx * Ly * Lz
    surface = 2.0 * (Lx * Ly + Lx * Lz + Ly * Lz)
    absorption = SABINE * volume / (surface * t60)
    if not 0.0 < absorption <= 1.0:
        raise ConfigError(f"T60 of {t60} s is out of reach in a {dimensions} room")
    return float(absorption)


def random_room(
    rng: np.random.Generator, t60: float = 0.3, sample_rate: int = 16000, max_order: int = 10
) -> RoomSpec:
    """
    Random office-sized room with source and microphone at least 1 m
    apart and 0.5 m away from the walls.

    """
    L = np.array([rng.uniform(4.0, 8.0), rng.uniform(3.5, 6.0), rng.uniform(2.5, 3.5)])
    while True:
        source = rng.uniform(0.5, L - 0.5)
        mic = rng.uniform(0.5, L - 0.5)
        if np.linalg.norm(source - mic) >= 1.0:
            break
    return RoomSpec(
        dimensions=tuple(L),
        absorption=sabine_absorption(tuple(L), t60),
        source=tuple(source),
        mic=tuple(mic),
        max_order=max_order,
        sample_rate=sample_rate,
    )


@dataclass(frozen=True)
class ImageSources:
    """
    Image sources of a room up to its reflection order.

    """

    positions: np.ndarray
    orders: np.ndarray
    distances: np.ndarray
    amplitudes: np.ndarray

    def __len__(self) -> int:
        return len(self.orders)

    def delays(self, room: RoomSpec) -> np.ndarray:
        """
        Arrival times in samples.

        """
        return self.distances / room.c * room.sample_rate


def image_sources(room: RoomSpec) -> ImageSources:
    """
    Enumerate mirror images (1 − 2p)·s + 2rL, p ∈ {0, 1}³, with
    Σ_axes |r − p| + |r| ≤ max_order reflections.

    """
    N = room.max_order
    L = np.array(room.dimensions)
    s = np.array(room.source)
    mic = np.array(room.mic)

    p = np.array(list(itertools.product((0, 1), repeat=3)))
    r = np.array(list(itertools.product(range(-N, N + 1), repeat=3)))

    P = np.repeat(p, len(r), axis=0)
    Rr = np.tile(r, (len(p), 1))

    orders = np.sum(np.abs(Rr - P) + np.abs(Rr), axis=1)
    keep = orders <= N
    P, Rr, orders = P[keep], Rr[keep], orders[keep]

    positions = (1 - 2 * P) * s + 2 * Rr * L
    distances = np.linalg.norm(positions - mic, axis=1)
    amplitudes = room.beta ** orders / (4.0 * np.pi * np.maximum(distances, 1e-12))

    order = np.lexsort((orders, distances))

    return ImageSources(
        positions=positions[order],
        orders=orders[order],
        distances=distances[order],
        amplitudes=amplitudes[order],
    )


def _fractional_kernel(t: np.ndarray) -> np.ndarray:
    # Hann-windowed sinc over FRACTIONAL_TAPS samples
    width = FRACTIONAL_TAPS / 2.0
    window = np.where(np.abs(t) < width, 0.5 * (1.0 + np.cos(np.pi * t / width)), 0.0)
    return window * np.sinc(t)


def ism_rir(room: RoomSpec, uid: str = "rir") -> AudioBuffer:
    """
    Room impulse response by the image source method.

    Every image contributes β^order/(4πd), delayed by d/c seconds
    through a Hann-windowed sinc fractional delay.

    Parameters:
        room : RoomSpec
        uid : str

    Returns:
        The impulse response at the room sample rate.

    """
    if room.distance() == 0.0:
        raise ConfigError("source and microphone coincide")

    images = image_sources(room)
    audible = images.amplitudes > 0
    delays = images.delays(room)[audible]
    amplitudes = images.amplitudes[audible]

    half = FRACTIONAL_TAPS // 2
    if room.length is not None:
        n = int(np.ceil(room.length * room.sample_rate))
    else:
        n = int(np.ceil(delays.max())) + half + 1

    h = np.zeros(n)

    offsets = np.arange(-half, half + 1)
    idx = np.round(delays).astype(int)[:, None] + offsets[None, :]
    values = amplitudes[:, None] * _fractional_kernel(idx - delays[:, None])
    valid = (idx >= 0) & (idx < n)
    np.add.at(h, idx[valid], values[valid])

    return AudioBuffer(samples=h, sample_rate=room.sample_rate, uid=uid)


def convolve_rir(audio: AudioBuffer, rir: AudioBuffer) -> AudioBuffer:
    """
    Full linear convolution of audio with an impulse response: the
    output has len(audio) + len(rir) − 1 samples.

    """
    if audio.sample_rate != rir.sample_rate:
        raise ConfigError(
            f"audio at {audio.sample_rate} Hz and RIR at {rir.sample_rate} Hz"
        )
    if len(audio) == 0 or len(rir) == 0:
        return audio.copy(samples=np.zeros(max(len(audio) + len(rir) - 1, 0)))
    return audio.copy(samples=signal.fftconvolve(audio.samples, rir.samples, mode="full"))


def _align_noise(noise: np.ndarray, n: int, seed: Optional[int]) -> np.ndarray:
    # Noise is tiled (or cut) from a random start so that it covers n samples.
    rng = default_rng(seed, 7)
    start = int(rng.integers(len(noise)))
    reps = int(np.ceil((start + n) / len(noise)))
    return np.tile(noise, reps)[start : start + n]


def scale_noise_to_snr(
    speech: AudioBuffer, noise: AudioBuffer, snr_db: float, seed: Optional[int] = 0
) -> np.ndarray:
    """
    Noise aligned to the speech length and scaled so that
    10·log10(P_speech/P_noise) = snr_db.

    """
    if speech.sample_rate != noise.sample_rate:
        raise ConfigError(
            f"speech at {speech.sample_rate} Hz and noise at {noise.sample_rate} Hz"
        )
    if len(noise) == 0:
        raise SilentSignalError("empty noise signal")

    p_speech = speech.power()
    if p_speech == 0.0:
        raise SilentSignalError(f"speech '{speech.uid}' is silent")

    aligned = _align_noise(noise.samples, len(speech), seed)
    p_noise = float(np.mean(aligned**2))
    if p_noise == 0.0:
        raise SilentSignalError(f"noise '{noise.uid}' is silent")

    return aligned * np.sqrt(p_speech / (p_noise * 10.0 ** (snr_db / 10.0)))


def mix_at_snr(
    speech: AudioBuffer, noise: AudioBuffer, snr_db: float, seed: Optional[int] = 0
) -> AudioBuffer:
    """
    Add noise to speech at the requested signal-to-noise ratio in dB.

    """
    return speech.copy(samples=speech.samples + scale_noise_to_snr(speech, noise, snr_db, seed))


def colored_noise(
    n: int, exponent: float = 1.0, sample_rate: int = 16000, seed: Optional[int] = 0, uid: str = ""
) -> AudioBuffer:
    """
    Gaussian noise with a 1/f^exponent power spectrum and unit power;
    exponent 0 is white, 1 pink and 2 brown noise.

    """
    rng = default_rng(seed)
    spectrum = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n)
    f[0] = f[1] if n > 1 else 1.0
    x = np.fft.irfft(spectrum / f ** (exponent / 2.0), n=n)
    x -= x.mean()
    power = np.mean(x**2)
    return AudioBuffer(
        samples=x / np.sqrt(power) if power > 0 else x, sample_rate=sample_rate, uid=uid
    )


@dataclass(frozen=True)
class SyntheticSpeaker:
    """
    Voice of a synthetic talker: pitch, vowel formants, glottal tilt,
    breathiness and syllable rate.

    """

    speaker_id: str
    f0: float = 120.0
    formants: tuple = VOWELS
    bandwidths: tuple[float, float, float] = (80.0, 100.0, 140.0)
    tilt: float = 0.9
    breathiness: float = 0.05
    jitter: float = 0.01
    rate: float = 4.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if not 50.0 <= self.f0 <= 500.0:
            raise ConfigError(f"Invalid f0: {self.f0}")
        if not 0.0 <= self.tilt < 1.0:
            raise ConfigError(f"Invalid glottal tilt: {self.tilt}")
        if not self.rate > 0:
            raise ConfigError(f"Invalid syllable rate: {self.rate}")
        object.__setattr__(self, "formants", tuple(tuple(map(float, v)) for v in self.formants))


def random_speaker(rng: np.random.Generator, speaker_id: str) -> SyntheticSpeaker:
    """
    Draw a talker: a vocal tract length factor scales the reference
    vowels, each vowel is perturbed individually.

    """
    scale = rng.uniform(0.85, 1.2)
    formants = tuple(
        tuple(float(f * scale * rng.uniform(0.93, 1.07)) for f in vowel) for vowel in VOWELS
    )
    return SyntheticSpeaker(
        speaker_id=speaker_id,
        f0=float(rng.uniform(85.0, 240.0)),
        formants=formants,
        bandwidths=tuple(float(b * rng.uniform(0.8, 1.3)) for b in (80.0, 100.0, 140.0)),
        tilt=float(rng.uniform(0.75, 0.97)),
        breathiness=float(rng.uniform(0.01, 0.1)),
        jitter=float(rng.uniform(0.005, 0.02)),
        rate=float(rng.uniform(3.0, 5.5)),
    )


def _resonator(x: np.ndarray, frequency: float, bandwidth: float, sample_rate: int) -> np.ndarray:
    r = np.exp(-np.pi * bandwidth / sample_rate)
    theta = 2.0 * np.pi * frequency / sample_rate
    a = [1.0, -2.0 * r * np.cos(theta), r * r]
    return signal.lfilter([1.0 - r], a, x)


def speech_like(
    duration: float,
    speaker: SyntheticSpeaker,
    sample_rate: int = 16000,
    seed: Optional[int] = 0,
    uid: str = "",
) -> AudioBuffer:
    """
    Speech-like signal of a synthetic talker.

    A jittered glottal pulse train at the speaker's f0 plus aspiration
    noise is tilted by a one-pole lowpass, passed through the formant
    resonators of a random vowel per syllable, and shaped by a syllabic
    envelope with short pauses.

    Parameters:
        duration : float
            Seconds.
        speaker : SyntheticSpeaker
        sample_rate : int
        seed : int
            Utterance seed; the content varies, the voice does not.
        uid : str

    """
    if not duration > 0:
        raise ConfigError(f"Invalid duration: {duration}")

    rng = default_rng(seed)
    n = int(round(duration * sample_rate))
    nyquist = 0.5 * sample_rate

    # f0 contour: slow declination with intonation and cycle jitter
    t = np.arange(n) / sample_rate
    contour = speaker.f0 * (1.0 + 0.08 * np.sin(2.0 * np.pi * rng.uniform(0.3, 0.8) * t))
    contour *= 1.0 - 0.1 * t / max(duration, 1e-9)
    contour *= 1.0 + speaker.jitter * rng.standard_normal(n)
    phase = np.cumsum(contour) / sample_rate
    pulses = np.diff(np.floor(phase), prepend=0.0)

    source = signal.lfilter([1.0], [1.0, -speaker.tilt], pulses)
    source /= np.sqrt(np.mean(source**2)) + 1e-12
    source += speaker.breathiness * rng.standard_normal(n)

    syllable = int(round(sample_rate / speaker.rate))
    out = np.zeros(n)
    envelope = np.zeros(n)
    for start in range(0, n, syllable):
        stop = min(start + syllable, n)
        vowel = speaker.formants[int(rng.integers(len(speaker.formants)))]
        segment = source[start:stop]
        for frequency, bandwidth in zip(vowel, speaker.bandwidths):
            if frequency < nyquist:
                segment = _resonator(segment, frequency, bandwidth, sample_rate)
        out[start:stop] = segment

        voiced = int((stop - start) * rng.uniform(0.6, 0.9))
        if voiced > 2:
            envelope[start : start + voiced] = signal.get_window("hann", voiced, fftbins=False)

    out *= envelope
    peak = np.max(np.abs(out))

    return AudioBuffer(
        samples=0.5 * out / peak if peak > 0 else out, sample_rate=sample_rate, uid=uid
    )

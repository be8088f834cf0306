#!/usr/bin/env python3

from __future__ import annotations

from typing import Optional

import numpy as np

from farfieldsv.exceptions import ConfigError, FormatError, NonFiniteError
from farfieldsv.suite import Suite

message = Suite.message


class AudioBuffer:
    """
    farfieldsv audio class.
    Mono samples normalized to [-1, 1] and their sample rate.

    """

    def __init__(self, d: Optional[dict] = None, **keywords) -> None:
        """
        Initialize AudioBuffer class.

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
        samples = keywords.get("samples", np.zeros(0))
        self.sample_rate = keywords.get("sample_rate", 16000)
        self.uid = keywords.get("uid", "")

        if isinstance(d, dict):
            if d.get("type", "") == self.__class__.__name__:
                if "samples" not in keywords:
                    samples = d["samples"]
                if "sample_rate" not in keywords:
                    self.sample_rate = d["sample_rate"]
                if "uid" not in keywords:
                    self.uid = d["uid"]

        self.samples = np.asarray(samples, dtype=float)

        if self.samples.ndim != 1:
            raise ConfigError("Expecting mono audio (one-dimensional samples)")

        if not self.sample_rate > 0:
            raise ConfigError(f"Invalid sample rate: {self.sample_rate}")

        if not np.all(np.isfinite(self.samples)):
            raise NonFiniteError(f"Non-finite samples in audio '{self.uid}'")

    def get(self) -> dict:
        """
        Return data dictionary with expected keywords.

        """
        return {
            "type": self.__class__.__name__,
            "samples": self.samples,
            "sample_rate": self.sample_rate,
            "uid": self.uid,
        }

    def __repr__(self) -> str:
        """
        Class representation.

        """
        return (
            f"{self.__class__.__name__}("
            f"{self.uid=},{self.sample_rate=},nsamples={len(self.samples)})"
        )

    def __str__(self) -> str:
        """
        A description of the instance.
        """

        return (
            "farfieldsv AudioBuffer instance.\n"
            f"{len(self.samples)} samples at {self.sample_rate} Hz "
            f"({self.duration():.3f} s)"
        )

    def __len__(self) -> int:
        return len(self.samples)

    def duration(self) -> float:
        """
        Duration in seconds.

        """
        return len(self.samples) / self.sample_rate

    def power(self) -> float:
        """
        Mean power of the samples.

        """
        return float(np.mean(self.samples**2)) if len(self.samples) else 0.0

    def copy(self, samples: Optional[np.ndarray] = None) -> AudioBuffer:
        """
        Copy with the same rate and uid, optionally with new samples.

        """
        return AudioBuffer(
            samples=self.samples.copy() if samples is None else samples,
            sample_rate=self.sample_rate,
            uid=self.uid,
        )

    @classmethod
    def read(cls, filename: str, uid: str = "") -> AudioBuffer:
        """
        Read a mono PCM WAV file.

        Parameters:
            filename : str
                WAV file.
            uid : str
                Utterance id, defaults to the file name.

        """
        import soundfile as sf  # type: ignore

        try:
            samples, rate = sf.read(filename, dtype="float64", always_2d=False)
        except RuntimeError as e:
            raise FormatError(f"{filename}: Format not recognized") from e

        if samples.ndim != 1:
            raise FormatError(f"{filename}: Expecting mono audio")

        return cls(samples=samples, sample_rate=int(rate), uid=uid or filename)

    def write(self, filename: str, verbose: bool = False) -> None:
        """
        Write as 16-bit PCM WAV. Samples are clipped to the PCM range.

        """
        import soundfile as sf  # type: ignore

        sf.write(
            filename,
            np.clip(self.samples, -1.0, 1.0 - 2.0**-15),
            int(self.sample_rate),
            subtype="PCM_16",
        )

        if verbose:
            message(f"WRITTEN: {filename}")

    def plot(self, **keywords) -> None:
        """
        Plot the waveform.

        """
        import matplotlib.pyplot as plt  # type: ignore

        _, ax = plt.subplots()
        t = np.arange(len(self.samples)) / self.sample_rate
        ax.plot(t, self.samples, lw=0.5, color=keywords.get("color", "tab:blue"))
        ax.set_xlabel("time [s]")
        ax.set_ylabel("amplitude")
        ax.set_title(keywords.get("title", self.uid))

        if keywords.get("save"):
            plt.savefig(keywords["save"])
            plt.close()
        elif keywords.get("show", False):
            plt.show()

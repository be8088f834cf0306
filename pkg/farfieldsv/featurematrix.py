#!/usr/bin/env python3

from __future__ import annotations

import struct
from typing import Optional

import numpy as np

from farfieldsv.exceptions import ConfigError, DimensionError, FormatError, NonFiniteError
from farfieldsv.suite import Suite

message = Suite.message

MAGIC = b"FSV1"

KIND_CODES = {
    "mfcc20": 0,
    "mfcc30": 1,
    "pncc": 2,
    "mfbank8k": 3,
    "mfbank16k": 4,
    "gfbank": 5,
    "raw": 255,
}

KIND_DIMS = {
    "mfcc20": 60,
    "mfcc30": 30,
    "pncc": 60,
    "mfbank8k": 64,
    "mfbank16k": 64,
    "gfbank": 64,
}


class FeatureMatrix:
    """
    farfieldsv feature class.
    Time-major matrix of per-frame feature vectors with the frame shift
    and the feature kind.

    """

    def __init__(self, d: Optional[dict] = None, **keywords) -> None:
        """
        Initialize FeatureMatrix class.

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
        frames = keywords.get("frames", np.zeros((0, 0)))
        self.frame_shift = keywords.get("frame_shift", 0.010)
        self.feature_kind = keywords.get("feature_kind", "raw")
        self.uid = keywords.get("uid", "")

        if isinstance(d, dict):
            if d.get("type", "") == self.__class__.__name__:
                if "frames" not in keywords:
                    frames = d["frames"]
                if "frame_shift" not in keywords:
                    self.frame_shift = d["frame_shift"]
                if "feature_kind" not in keywords:
                    self.feature_kind = d["feature_kind"]
                if "uid" not in keywords:
                    self.uid = d["uid"]

        self.frames = np.atleast_2d(np.asarray(frames, dtype=float))

        if self.feature_kind not in KIND_CODES:
            raise ConfigError(f"Unknown feature kind: {self.feature_kind}")

        expected = KIND_DIMS.get(self.feature_kind)
        if expected is not None and self.frames.size and self.frames.shape[1] != expected:
            raise DimensionError(
                f"{self.feature_kind} features must be {expected}-dimensional, "
                f"got {self.frames.shape[1]}"
            )

        if not np.all(np.isfinite(self.frames)):
            raise NonFiniteError(f"Non-finite features for '{self.uid}'")

    def get(self) -> dict:
        """
        Return data dictionary with expected keywords.

        """
        return {
            "type": self.__class__.__name__,
            "frames": self.frames,
            "frame_shift": self.frame_shift,
            "feature_kind": self.feature_kind,
            "uid": self.uid,
        }

    def __repr__(self) -> str:
        """
        Class representation.

        """
        return (
            f"{self.__class__.__name__}("
            f"{self.uid=},{self.feature_kind=},shape={self.frames.shape})"
        )

    def __str__(self) -> str:
        """
        A description of the instance.
        """

        T, D = self.frames.shape
        return f"farfieldsv FeatureMatrix instance.\n{T} frames of {D} {self.feature_kind} features"

    def __len__(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    def copy(self, frames: Optional[np.ndarray] = None) -> FeatureMatrix:
        """
        Copy keeping the metadata, optionally with new frames.

        """
        return FeatureMatrix(
            frames=self.frames.copy() if frames is None else frames,
            frame_shift=self.frame_shift,
            feature_kind=self.feature_kind,
            uid=self.uid,
        )

    def write(self, filename: str, verbose: bool = False) -> None:
        """
        Write the FSV1 archive: magic, u32 T, u32 D, u8 kind, then the
        f32 row-major payload, little-endian.

        """
        T, D = self.frames.shape
        with open(filename, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<IIB", T, D, KIND_CODES[self.feature_kind]))
            f.write(self.frames.astype("<f4").tobytes(order="C"))

        if verbose:
            message(f"WRITTEN: {filename}")

    @classmethod
    def read(cls, filename: str, uid: str = "", frame_shift: float = 0.010) -> FeatureMatrix:
        """
        Read an FSV1 archive. The format does not carry the frame shift.

        """
        with open(filename, "rb") as f:
            blob = f.read()

        if blob[:4] != MAGIC or len(blob) < 13:
            raise FormatError(f"{filename}: Format not recognized")

        T, D, code = struct.unpack("<IIB", blob[4:13])
        kinds = {v: k for k, v in KIND_CODES.items()}
        if code not in kinds:
            raise FormatError(f"{filename}: unknown feature kind code {code}")

        payload = np.frombuffer(blob, dtype="<f4", offset=13)
        if payload.size != T * D:
            raise FormatError(f"{filename}: truncated payload")

        return cls(
            frames=payload.reshape(T, D).astype(float),
            frame_shift=frame_shift,
            feature_kind=kinds[code],
            uid=uid or filename,
        )

    def plot(self, **keywords) -> None:
        """
        Plot the feature matrix as an image.

        """
        import matplotlib.pyplot as plt  # type: ignore

        _, ax = plt.subplots()
        T = self.frames.shape[0]
        im = ax.imshow(
            self.frames.T,
            aspect="auto",
            origin="lower",
            extent=(0, T * self.frame_shift, 0, self.frames.shape[1]),
            cmap=keywords.get("cmap", "viridis"),
        )
        plt.colorbar(im, ax=ax)
        ax.set_xlabel("time [s]")
        ax.set_ylabel(f"{self.feature_kind} coefficient")
        ax.set_title(keywords.get("title", self.uid))

        if keywords.get("save"):
            plt.savefig(keywords["save"])
            plt.close()
        elif keywords.get("show", False):
            plt.show()

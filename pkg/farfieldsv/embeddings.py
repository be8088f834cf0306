#!/usr/bin/env python3

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from farfieldsv.data import Data
from farfieldsv.exceptions import DimensionError, FormatError
from farfieldsv.suite import Suite

message = Suite.message

MAGIC = b"FSVE"


@dataclass(frozen=True, eq=False)
class Embedding:
    """
    Utterance-level speaker vector with its provenance.

    """

    vector: np.ndarray
    extractor: str = ""
    dereverb: bool = False
    uid: str = ""
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.vector)


class Embeddings(Data):
    """
    farfieldsv embeddings class.
    Utterance id keyed embedding vectors of one extractor, with optional
    speaker labels.

    """

    def __init__(self, d: Optional[dict] = None, **keywords) -> None:
        super().__init__(d, **keywords)
        self.__set(d, **keywords)

    def set(self, d: Optional[dict] = None, **keywords) -> None:
        """
        Calls the :meth:`farfieldsv.data.Data.set` to parse keywords.

        """
        super().set(d, **keywords)
        self.__set(d, **keywords)

    def __set(self, d: Optional[dict] = None, **keywords) -> None:
        """
        Populate data dictionary helper.

        """
        self.speakers = keywords.get("speakers", dict())

        if isinstance(d, dict):
            if d.get("type", "") == self.__class__.__name__:
                if "speakers" not in keywords:
                    self.speakers = d["speakers"]

        self.model.setdefault("extractor", "")
        self.model.setdefault("dereverb", False)

        dims = {np.shape(self.data[uid]) for uid in self.uids}
        if len(dims) > 1:
            raise DimensionError(f"Embeddings of different dimensions: {sorted(dims)}")

    def get(self) -> dict:
        """
        Assigns class variables from inherited dictionary.

        """
        d = super().get()
        d["type"] = self.__class__.__name__
        d["speakers"] = self.speakers
        return d

    @classmethod
    def from_list(
        cls, embeddings: Iterable[Embedding], speakers: Optional[dict] = None
    ) -> Embeddings:
        """
        Collect :class:`Embedding` instances.

        """
        embeddings = list(embeddings)
        model = dict()
        if embeddings:
            model = {
                "extractor": embeddings[0].extractor,
                "dereverb": embeddings[0].dereverb,
            }
        return cls(
            data={e.uid: np.asarray(e.vector, dtype=float) for e in embeddings},
            uids=[e.uid for e in embeddings],
            model=model,
            speakers=dict(speakers or dict()),
        )

    @property
    def dim(self) -> int:
        return len(self.data[self.uids[0]]) if self.uids else 0

    def embedding(self, uid: str) -> Embedding:
        return Embedding(
            vector=self.data[uid],
            extractor=self.model["extractor"],
            dereverb=self.model["dereverb"],
            uid=uid,
        )

    def matrix(self, uids: Optional[list[str]] = None) -> np.ndarray:
        """
        Stack the vectors of the given (default: all) utterances.

        """
        uids = self.uids if uids is None else uids
        if not uids:
            return np.zeros((0, self.dim))
        return np.vstack([self.data[uid] for uid in uids])

    def labels(self, uids: Optional[list[str]] = None) -> list[str]:
        uids = self.uids if uids is None else uids
        return [self.speakers[uid] for uid in uids]

    def subset(self, uids: list[str]) -> Embeddings:
        """
        New instance restricted to the given utterances, in that order.

        """
        return Embeddings(
            data={uid: self.data[uid] for uid in uids},
            uids=list(uids),
            model=dict(self.model),
            speakers={uid: self.speakers[uid] for uid in uids if uid in self.speakers},
        )

    def transform(self, func) -> Embeddings:
        """
        New instance with func applied to the stacked matrix.

        """
        transformed = np.atleast_2d(func(self.matrix()))
        return Embeddings(
            data={uid: transformed[i] for i, uid in enumerate(self.uids)},
            uids=list(self.uids),
            model=dict(self.model),
            speakers=dict(self.speakers),
        )

    def write(self, filename: str, verbose: bool = False) -> None:
        """
        Write the FSVE archive: magic, u32 N, u32 D, the extractor id and
        dereverb flag, the utterance-id string table and the f32 matrix,
        little-endian.

        """
        N, D = len(self.uids), self.dim
        extractor = str(self.model["extractor"]).encode("utf-8")
        with open(filename, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<II", N, D))
            f.write(struct.pack("<H", len(extractor)) + extractor)
            f.write(struct.pack("<B", int(bool(self.model["dereverb"]))))
            for uid in self.uids:
                b = uid.encode("utf-8")
                f.write(struct.pack("<H", len(b)) + b)
            f.write(self.matrix().astype("<f4").tobytes(order="C"))

        if verbose:
            message(f"WRITTEN: {filename}")

    @classmethod
    def read(cls, filename: str, speakers: Optional[dict] = None) -> Embeddings:
        """
        Read an FSVE archive.

        """
        with open(filename, "rb") as f:
            if f.read(4) != MAGIC:
                raise FormatError(f"{filename}: Format not recognized")
            N, D = struct.unpack("<II", f.read(8))
            (n,) = struct.unpack("<H", f.read(2))
            extractor = f.read(n).decode("utf-8")
            (dereverb,) = struct.unpack("<B", f.read(1))
            uids = list()
            for _ in range(N):
                (n,) = struct.unpack("<H", f.read(2))
                uids.append(f.read(n).decode("utf-8"))
            payload = np.frombuffer(f.read(), dtype="<f4")

        if payload.size != N * D:
            raise FormatError(f"{filename}: truncated payload")

        matrix = payload.reshape(N, D).astype(float)

        return cls(
            data={uid: matrix[i] for i, uid in enumerate(uids)},
            uids=uids,
            model={"extractor": extractor, "dereverb": bool(dereverb)},
            speakers=dict(speakers or dict()),
        )

    def plot(self, **keywords) -> None:
        """
        Scatter the first two principal components, coloured by speaker.

        """
        import matplotlib.pyplot as plt  # type: ignore

        X = self.matrix()
        X = X - X.mean(axis=0)
        _, _, Vt = np.linalg.svd(X, full_matrices=False)
        P = X @ Vt[:2].T

        _, ax = plt.subplots()
        speakers = [self.speakers.get(uid, "") for uid in self.uids]
        for speaker in sorted(set(speakers)):
            idx = [i for i, s in enumerate(speakers) if s == speaker]
            ax.scatter(P[idx, 0], P[idx, 1], s=12, label=speaker or None)
        ax.set_xlabel("PC 1")
        ax.set_ylabel("PC 2")
        ax.set_title(keywords.get("title", self.model["extractor"]))
        if len(set(speakers)) <= 20 and any(speakers):
            ax.legend(fontsize="small")

        if keywords.get("save"):
            plt.savefig(keywords["save"])
            plt.close()
        elif keywords.get("show", False):
            plt.show()

#!/usr/bin/env python3

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from farfieldsv.exceptions import (
    AlignmentError,
    DimensionError,
    DuplicateTrialError,
    FormatError,
    MissingClassError,
)
from farfieldsv.suite import Suite

message = Suite.message

LABELS = ("tgt", "imp")


def read_columns(filename: str, names: list[str], strings: list[str]):
    from astropy.io import ascii  # type: ignore

    try:
        return ascii.read(
            filename,
            format="no_header",
            delimiter=" ",
            names=names,
            guess=False,
            converters={name: [ascii.convert_numpy(str)] for name in strings},
        )
    except (ValueError, IndexError, ascii.InconsistentTableError) as e:
        raise FormatError(f"{filename}: {e}") from e


class TrialList:
    """
    farfieldsv trial list class.
    Ordered (enroll, test) utterance pairs with optional target/impostor
    labels.

    """

    def __init__(self, d: Optional[dict] = None, **keywords) -> None:
        """
        Initialize TrialList class.

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
        self.enroll = list(keywords.get("enroll", list()))
        self.test = list(keywords.get("test", list()))
        labels = keywords.get("labels")

        if isinstance(d, dict):
            if d.get("type", "") == self.__class__.__name__:
                if "enroll" not in keywords:
                    self.enroll = list(d["enroll"])
                if "test" not in keywords:
                    self.test = list(d["test"])
                if "labels" not in keywords:
                    labels = d["labels"]

        self.labels = None if labels is None else [str(label) for label in labels]

        if len(self.enroll) != len(self.test):
            raise DimensionError(f"{len(self.enroll)} enrollment and {len(self.test)} test ids")

        if self.labels is not None:
            if len(self.labels) != len(self.enroll):
                raise DimensionError(f"{len(self.labels)} labels for {len(self.enroll)} trials")
            unknown = sorted(set(self.labels) - set(LABELS))
            if unknown:
                raise FormatError(f"Unknown trial label(s): {unknown}")

        if any(not e or not t for e, t in self.pairs()):
            raise DimensionError("empty utterance id in trial list")

        seen = set()
        for pair in self.pairs():
            if pair in seen:
                raise DuplicateTrialError(f"duplicate trial {pair[0]} {pair[1]}")
            seen.add(pair)

    def get(self) -> dict:
        """
        Return data dictionary with expected keywords.

        """
        return {
            "type": self.__class__.__name__,
            "enroll": self.enroll,
            "test": self.test,
            "labels": self.labels,
        }

    def __repr__(self) -> str:
        """
        Class representation.

        """
        return f"{self.__class__.__name__}({len(self)} trials,labelled={self.labels is not None})"

    def __str__(self) -> str:
        """
        A description of the instance.
        """

        text = f"farfieldsv TrialList instance.\n{len(self)} trials"
        if self.labels is not None:
            text += f", {int(self.is_target().sum())} targets"
        return text

    def __len__(self) -> int:
        return len(self.enroll)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TrialList):
            return NotImplemented
        return self.enroll == other.enroll and self.test == other.test

    def pairs(self) -> list[tuple[str, str]]:
        return list(zip(self.enroll, self.test))

    def utterances(self) -> list[str]:
        """
        Distinct utterance ids, enrollment side first, in order of
        appearance.

        """
        return list(dict.fromkeys(self.enroll + self.test))

    def is_target(self) -> np.ndarray:
        if self.labels is None:
            raise MissingClassError("trial list carries no labels")
        return np.array([label == "tgt" for label in self.labels])

    def write(self, filename: str) -> None:
        """
        Write ``enroll test [tgt|imp]`` lines.

        """
        from astropy.io import ascii  # type: ignore
        from astropy.table import Table  # type: ignore

        columns = [self.enroll, self.test]
        if self.labels is not None:
            columns.append(self.labels)

        ascii.write(
            Table(columns), filename, format="no_header", delimiter=" ", overwrite=True
        )

    @classmethod
    def read(cls, filename: str) -> TrialList:
        """
        Read a trial list or key file.

        """
        with open(filename) as f:
            first = f.readline().split()

        if len(first) not in (2, 3):
            raise FormatError(f"{filename}: expected 2 or 3 columns")

        names = ["enroll", "test", "label"][: len(first)]
        data = read_columns(filename, names, names)

        return cls(
            enroll=list(data["enroll"]),
            test=list(data["test"]),
            labels=list(data["label"]) if "label" in names else None,
        )

    @classmethod
    def from_speakers(cls, enroll: Sequence[str], test: Sequence[str], speakers: dict) -> TrialList:
        """
        Labelled trial list from a speaker map.

        """
        return cls(
            enroll=list(enroll),
            test=list(test),
            labels=["tgt" if speakers[e] == speakers[t] else "imp" for e, t in zip(enroll, test)],
        )


class LabeledScoreSet:
    """
    farfieldsv labelled score class.
    Scores with their target (True) or impostor (False) labels.

    """

    def __init__(self, d: Optional[dict] = None, **keywords) -> None:
        """
        Initialize LabeledScoreSet class.

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
        scores = keywords.get("scores", list())
        labels = keywords.get("labels", list())
        self.system = keywords.get("system", "")

        if isinstance(d, dict):
            if d.get("type", "") == self.__class__.__name__:
                if "scores" not in keywords:
                    scores = d["scores"]
                if "labels" not in keywords:
                    labels = d["labels"]
                if "system" not in keywords:
                    self.system = d["system"]

        self.scores = np.asarray(scores, dtype=float).ravel()
        self.labels = np.asarray(labels, dtype=bool).ravel()

        if self.scores.shape != self.labels.shape:
            raise DimensionError(f"{len(self.scores)} scores and {len(self.labels)} labels")

    def get(self) -> dict:
        """
        Return data dictionary with expected keywords.

        """
        return {
            "type": self.__class__.__name__,
            "scores": self.scores,
            "labels": self.labels,
            "system": self.system,
        }

    def __repr__(self) -> str:
        """
        Class representation.

        """
        return f"{self.__class__.__name__}({self.system=},{len(self)} trials)"

    def __str__(self) -> str:
        """
        A description of the instance.
        """

        return (
            f"farfieldsv LabeledScoreSet instance.\n{self.system}: "
            f"{len(self.targets())} targets, {len(self.impostors())} impostors"
        )

    def __len__(self) -> int:
        return len(self.scores)

    def targets(self) -> np.ndarray:
        return self.scores[self.labels]

    def impostors(self) -> np.ndarray:
        return self.scores[~self.labels]

    def check(self) -> None:
        """
        Raise when either class is absent.

        """
        if not np.any(self.labels):
            raise MissingClassError(f"no target trials in '{self.system}'")
        if np.all(self.labels):
            raise MissingClassError(f"no impostor trials in '{self.system}'")

    def transformed(self, scores: np.ndarray) -> LabeledScoreSet:
        """
        Same labels with new scores.

        """
        return LabeledScoreSet(scores=scores, labels=self.labels, system=self.system)


class ScoreSet:
    """
    farfieldsv score class.
    One score per trial of a trial list, for one system.

    """

    def __init__(self, d: Optional[dict] = None, **keywords) -> None:
        """
        Initialize ScoreSet class.

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
        self.trials = keywords.get("trials", TrialList())
        scores = keywords.get("scores", list())
        self.system = keywords.get("system", "")

        if isinstance(d, dict):
            if d.get("type", "") == self.__class__.__name__:
                if "trials" not in keywords:
                    self.trials = d["trials"]
                if "scores" not in keywords:
                    scores = d["scores"]
                if "system" not in keywords:
                    self.system = d["system"]

        self.scores = np.asarray(scores, dtype=float).ravel()

        if len(self.scores) != len(self.trials):
            raise DimensionError(f"{len(self.scores)} scores for {len(self.trials)} trials")

    def get(self) -> dict:
        """
        Return data dictionary with expected keywords.

        """
        return {
            "type": self.__class__.__name__,
            "trials": self.trials,
            "scores": self.scores,
            "system": self.system,
        }

    def __repr__(self) -> str:
        """
        Class representation.

        """
        return f"{self.__class__.__name__}({self.system=},{len(self)} trials)"

    def __str__(self) -> str:
        """
        A description of the instance.
        """

        return f"farfieldsv ScoreSet instance.\n{self.system}: {len(self)} scores"

    def __len__(self) -> int:
        return len(self.scores)

    def check_aligned(self, other: ScoreSet) -> None:
        """
        Raise naming the first trial where the two sets differ.

        """
        for i, (a, b) in enumerate(zip(self.trials.pairs(), other.trials.pairs())):
            if a != b:
                raise AlignmentError(
                    f"'{self.system}' and '{other.system}' differ at trial {i}: "
                    f"{a[0]} {a[1]} vs {b[0]} {b[1]}"
                )
        if len(self) != len(other):
            raise AlignmentError(
                f"'{self.system}' has {len(self)} trials, '{other.system}' {len(other)}"
            )

    def with_scores(self, scores: np.ndarray, system: Optional[str] = None) -> ScoreSet:
        return ScoreSet(
            trials=self.trials,
            scores=scores,
            system=self.system if system is None else system,
        )

    def labeled(self, key: Optional[TrialList] = None) -> LabeledScoreSet:
        """
        Attach target/impostor labels, from the own trial list or from a
        key file covering every trial.

        """
        key = key or self.trials
        if key.labels is None:
            raise MissingClassError("trial key carries no labels")

        index = dict(zip(key.pairs(), key.labels))
        try:
            labels = [index[pair] == "tgt" for pair in self.trials.pairs()]
        except KeyError as e:
            raise AlignmentError(f"trial {e.args[0]} missing from the key") from e

        return LabeledScoreSet(scores=self.scores, labels=labels, system=self.system)

    def write(self, filename: str) -> None:
        """
        Write ``enroll test score`` lines.

        """
        from astropy.io import ascii  # type: ignore
        from astropy.table import Table  # type: ignore

        tbl = Table(
            [self.trials.enroll, self.trials.test, self.scores],
            names=["enroll", "test", "score"],
        )

        ascii.write(
            tbl,
            filename,
            format="no_header",
            delimiter=" ",
            formats={"score": "%.8f"},
            overwrite=True,
        )

    @classmethod
    def read(cls, filename: str, system: str = "") -> ScoreSet:
        """
        Read a score file.

        """
        data = read_columns(filename, ["enroll", "test", "score"], ["enroll", "test"])

        return cls(
            trials=TrialList(enroll=list(data["enroll"]), test=list(data["test"])),
            scores=np.asarray(data["score"], dtype=float),
            system=system or filename,
        )

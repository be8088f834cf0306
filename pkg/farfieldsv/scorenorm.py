#!/usr/bin/env python3
"""
scorenorm.py

Adaptive symmetric score normalization (AS-Norm): every trial score is
standardized against the top-X most similar cohort scores of its
enrollment and of its test utterance, and the two are averaged.

"""

from __future__ import annotations

import warnings
from typing import Callable, Optional, Sequence

import numpy as np
from tqdm import tqdm  # type: ignore

from farfieldsv.embeddings import Embeddings
from farfieldsv.exceptions import (
    ConfigError,
    DegenerateCohortError,
    InsufficientDataError,
    MissingCohortError,
)
from farfieldsv.suite import Suite
from farfieldsv.trials import ScoreSet, read_columns

message = Suite.message

Scorer = Callable[[np.ndarray, np.ndarray], np.ndarray]

# utterance id -> (cohort ids, scores against those cohort utterances)
CohortTable = dict[str, tuple[list[str], np.ndarray]]


def select_top_cohort(scores: np.ndarray, top_x: int) -> np.ndarray:
    """
    The top_x largest scores, descending; ties keep the input order.

    """
    scores = np.asarray(scores, dtype=float).ravel()
    if top_x < 2:
        raise ConfigError(f"top_x must be at least 2, got {top_x}")
    if scores.size == 0:
        raise InsufficientDataError("empty cohort")
    if top_x > scores.size:
        warnings.warn(
            f"top_x {top_x} clamped to the cohort size {scores.size}", RuntimeWarning
        )
        top_x = scores.size
    order = np.argsort(-scores, kind="stable")
    return scores[order[:top_x]]


class CohortScores:
    """
    farfieldsv cohort score class.
    Scores of one utterance against a cohort and the statistics of the
    top_x closest cohort members.

    """

    def __init__(self, d: Optional[dict] = None, **keywords) -> None:
        """
        Initialize CohortScores class.

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
        self.top_x = keywords.get("top_x", 10)
        self.uid = keywords.get("uid", "")

        if isinstance(d, dict):
            if d.get("type", "") == self.__class__.__name__:
                if "scores" not in keywords:
                    scores = d["scores"]
                if "top_x" not in keywords:
                    self.top_x = d["top_x"]
                if "uid" not in keywords:
                    self.uid = d["uid"]

        self.scores = np.asarray(scores, dtype=float).ravel()
        self.selected = select_top_cohort(self.scores, self.top_x)
        self.top_x = len(self.selected)

    def get(self) -> dict:
        """
        Return data dictionary with expected keywords.

        """
        return {
            "type": self.__class__.__name__,
            "scores": self.scores,
            "top_x": self.top_x,
            "uid": self.uid,
        }

    def __repr__(self) -> str:
        """
        Class representation.

        """
        return f"{self.__class__.__name__}({self.uid=},{self.top_x=},cohort={len(self.scores)})"

    def __str__(self) -> str:
        """
        A description of the instance.
        """

        return (
            f"farfieldsv CohortScores instance.\n{self.uid}: "
            f"mean {self.mean:.4f}, std {self.std:.4f} over the top {self.top_x}"
        )

    @property
    def mean(self) -> float:
        return float(self.selected.mean())

    @property
    def std(self) -> float:
        return float(self.selected.std())


def as_norm(raw: float, enroll_cohort: CohortScores, test_cohort: CohortScores) -> float:
    """
    ½[(s − μ_e)/σ_e + (s − μ_t)/σ_t].

    """
    for cohort in (enroll_cohort, test_cohort):
        if cohort.std == 0.0:
            raise DegenerateCohortError(
                f"cohort of '{cohort.uid}' has zero standard deviation over the top {cohort.top_x}"
            )
    return 0.5 * (
        (raw - enroll_cohort.mean) / enroll_cohort.std
        + (raw - test_cohort.mean) / test_cohort.std
    )


def score_cohort(
    uids: Sequence[str], embeddings: Embeddings, cohort: Embeddings, scorer: Scorer
) -> CohortTable:
    """
    Score every utterance against the whole cohort once.

    """
    C = cohort.matrix()
    table: CohortTable = dict()
    for uid in tqdm(uids, desc="cohort scoring", unit="utterance", colour="blue", leave=False):
        if uid not in embeddings:
            raise MissingCohortError(uid)
        E = np.repeat(embeddings[uid][None], len(C), axis=0)
        table[uid] = (list(cohort.uids), np.asarray(scorer(E, C), dtype=float))
    return table


def _cohort(table: CohortTable, uid: str, exclude: set, top_x: int) -> CohortScores:
    if uid not in table:
        raise MissingCohortError(uid)
    ids, scores = table[uid]
    keep = np.array([i not in exclude for i in ids], dtype=bool)
    return CohortScores(scores=scores[keep], top_x=top_x, uid=uid)


def normalize_with_table(scores: ScoreSet, table: CohortTable, top_x: int) -> ScoreSet:
    """
    AS-Norm of every trial from precomputed cohort scores. Cohort members
    with the id of the trial's own enrollment or test utterance are left
    out.

    """
    normalized = np.empty(len(scores))
    for i, ((e, t), s) in enumerate(zip(scores.trials.pairs(), scores.scores)):
        exclude = {e, t}
        normalized[i] = as_norm(
            s, _cohort(table, e, exclude, top_x), _cohort(table, t, exclude, top_x)
        )
    return scores.with_scores(normalized)


def normalize_trial_set(
    scores: ScoreSet,
    embeddings: Embeddings,
    cohort_embeddings: Embeddings,
    scorer: Scorer,
    top_x: int,
) -> ScoreSet:
    """
    AS-Norm of a trial set; cohort scores come from the same scorer as
    the trials and are computed once per utterance.

    Parameters:
        scores : ScoreSet
            Raw trial scores.
        embeddings : Embeddings
            Embeddings of the trial utterances.
        cohort_embeddings : Embeddings
        scorer : callable
            Row-wise scorer of paired enrollment and test matrices.
        top_x : int

    """
    table = score_cohort(scores.trials.utterances(), embeddings, cohort_embeddings, scorer)
    return normalize_with_table(scores, table, top_x)


def write_cohort_scores(filename: str, table: CohortTable) -> None:
    """
    Write ``utterance cohort score`` lines.

    """
    from astropy.io import ascii  # type: ignore
    from astropy.table import Table  # type: ignore

    uids, cohorts, values = list(), list(), list()
    for uid, (ids, scores) in table.items():
        uids.extend([uid] * len(ids))
        cohorts.extend(ids)
        values.extend(scores)

    ascii.write(
        Table([uids, cohorts, values], names=["utterance", "cohort", "score"]),
        filename,
        format="no_header",
        delimiter=" ",
        formats={"score": "%.8f"},
        overwrite=True,
    )


def read_cohort_scores(filename: str) -> CohortTable:
    """
    Read a cohort score file.

    """
    data = read_columns(filename, ["utterance", "cohort", "score"], ["utterance", "cohort"])

    table: dict[str, tuple[list[str], list[float]]] = dict()
    for uid, cohort, score in zip(data["utterance"], data["cohort"], data["score"]):
        ids, scores = table.setdefault(str(uid), (list(), list()))
        ids.append(str(cohort))
        scores.append(float(score))

    return {uid: (ids, np.asarray(scores)) for uid, (ids, scores) in table.items()}

#!/usr/bin/env python3
"""
test_scorenorm.py

Test the scorenorm.py module.
"""

import numpy as np
import pytest

from farfieldsv import scorenorm
from farfieldsv.backend import cosine_scores
from farfieldsv.embeddings import Embeddings
from farfieldsv.exceptions import (
    ConfigError,
    DegenerateCohortError,
    InsufficientDataError,
    MissingCohortError,
)
from farfieldsv.scorenorm import CohortScores
from farfieldsv.trials import ScoreSet, TrialList


@pytest.fixture(scope="module")
def test_embeddings():
    rng = np.random.default_rng(0)
    uids = ["e1", "e2", "t1", "t2"]
    return Embeddings(data={uid: rng.normal(size=4) for uid in uids}, uids=uids)


@pytest.fixture(scope="module")
def test_cohort():
    rng = np.random.default_rng(1)
    uids = [f"c{i:02d}" for i in range(30)]
    return Embeddings(data={uid: rng.normal(size=4) for uid in uids}, uids=uids)


@pytest.fixture(scope="module")
def test_scores(test_embeddings):
    trials = TrialList(enroll=["e1", "e1", "e2"], test=["t1", "t2", "t1"])
    E = test_embeddings.matrix(trials.enroll)
    T = test_embeddings.matrix(trials.test)
    return ScoreSet(trials=trials, scores=cosine_scores(E, T), system="cosine")


@pytest.fixture(scope="module")
def test_path(tmp_path_factory):
    return tmp_path_factory.mktemp("test_scorenorm")


class TestCohort:
    """
    Test the cohort selection.

    """

    def test_select(self):
        np.testing.assert_array_equal(scorenorm.select_top_cohort([0.1, 0.9, 0.5, 0.7], 2), [0.9, 0.7])

    def test_clamp(self):
        with pytest.warns(RuntimeWarning):
            selected = scorenorm.select_top_cohort([0.1, 0.2, 0.3], 10)
        assert len(selected) == 3

    def test_errors(self):
        with pytest.raises(ConfigError):
            scorenorm.select_top_cohort([0.1, 0.2], 1)
        with pytest.raises(InsufficientDataError):
            scorenorm.select_top_cohort([], 2)

    def test_statistics(self):
        cohort = CohortScores(scores=[0.0, 1.0, 3.0, -5.0], top_x=3, uid="u")
        assert cohort.top_x == 3
        assert cohort.mean == pytest.approx(4.0 / 3.0)
        assert cohort.std == pytest.approx(np.std([0.0, 1.0, 3.0]))

    def test_as_norm(self):
        enroll = CohortScores(scores=[1.0, 3.0], top_x=2)
        test = CohortScores(scores=[0.0, 4.0], top_x=2)
        assert scorenorm.as_norm(4.0, enroll, test) == pytest.approx(0.5 * (2.0 / 1.0 + 2.0 / 2.0))

    def test_degenerate(self):
        flat = CohortScores(scores=[0.5, 0.5, 0.1], top_x=2, uid="flat")
        other = CohortScores(scores=[1.0, 3.0], top_x=2)
        with pytest.raises(DegenerateCohortError):
            scorenorm.as_norm(1.0, flat, other)


class TestNormalization:
    """
    Test trial set normalization.

    """

    def test_matches_direct(self, test_scores, test_embeddings, test_cohort):
        normalized = scorenorm.normalize_trial_set(test_scores, test_embeddings, test_cohort, cosine_scores, 10)
        C = test_cohort.matrix()

        e, t = test_embeddings["e1"], test_embeddings["t2"]
        ce = scorenorm.select_top_cohort(cosine_scores(np.tile(e, (30, 1)), C), 10)
        ct = scorenorm.select_top_cohort(cosine_scores(np.tile(t, (30, 1)), C), 10)
        s = test_scores.scores[1]
        expected = 0.5 * ((s - ce.mean()) / ce.std() + (s - ct.mean()) / ct.std())

        assert normalized.scores[1] == pytest.approx(expected)
        assert normalized.trials == test_scores.trials
        assert normalized.system == "cosine"

    def test_symmetric(self, test_embeddings, test_cohort):
        table = scorenorm.score_cohort(["e1", "t1"], test_embeddings, test_cohort, cosine_scores)
        forward = ScoreSet(trials=TrialList(enroll=["e1"], test=["t1"]), scores=[0.3])
        backward = ScoreSet(trials=TrialList(enroll=["t1"], test=["e1"]), scores=[0.3])
        a = scorenorm.normalize_with_table(forward, table, 10).scores[0]
        b = scorenorm.normalize_with_table(backward, table, 10).scores[0]
        assert a == pytest.approx(b)

    def test_excludes_trial_utterances(self):
        # the test utterance is also a cohort member and must not count
        table = {
            "e": (["t", "a", "b", "c"], np.array([100.0, 1.0, 2.0, 3.0])),
            "t": (["e", "a", "b", "c"], np.array([100.0, 0.0, 1.0, 2.0])),
        }
        scores = ScoreSet(trials=TrialList(enroll=["e"], test=["t"]), scores=[2.0])
        normalized = scorenorm.normalize_with_table(scores, table, 3)
        sd = np.std([1.0, 2.0, 3.0])
        assert normalized.scores[0] == pytest.approx(0.5 * ((2.0 - 2.0) / sd + (2.0 - 1.0) / sd))

    def test_missing(self, test_scores):
        with pytest.raises(MissingCohortError):
            scorenorm.normalize_with_table(test_scores, {}, 10)

    def test_missing_embedding(self, test_cohort):
        with pytest.raises(MissingCohortError):
            scorenorm.score_cohort(["zz"], Embeddings(), test_cohort, cosine_scores)

    def test_write_read(self, test_embeddings, test_cohort, test_path):
        table = scorenorm.score_cohort(["e1", "t1"], test_embeddings, test_cohort, cosine_scores)
        filename = f"{test_path}/cohort.txt"
        scorenorm.write_cohort_scores(filename, table)
        restored = scorenorm.read_cohort_scores(filename)
        assert set(restored) == {"e1", "t1"}
        assert restored["e1"][0] == test_cohort.uids
        np.testing.assert_allclose(restored["t1"][1], table["t1"][1], atol=1e-8)

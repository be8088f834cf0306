#!/usr/bin/env python3
"""
test_corpus.py

Test the corpus.py module.
"""

import os

import numpy as np
import pytest

from farfieldsv import corpus
from farfieldsv.audio import AudioBuffer
from farfieldsv.augment import SyntheticSpeaker
from farfieldsv.corpus import CorpusSpec, Manifest
from farfieldsv.exceptions import ConfigError, InsufficientDataError


@pytest.fixture(scope="module")
def test_manifest():
    entries = [(f"s{s}-u{u}", f"s{s}", f"wav/s{s}-u{u}.wav") for s in range(5) for u in range(3)]
    return Manifest.from_entries(entries)


@pytest.fixture(scope="module")
def test_path(tmp_path_factory):
    return tmp_path_factory.mktemp("test_corpus")


@pytest.fixture(scope="module")
def test_corpus(test_path):
    spec = CorpusSpec(n_speakers=2, utterances=2, duration=0.5, max_order=4, seed=3)
    return corpus.generate_corpus(spec, f"{test_path}/corpus")


class TestManifest:
    """
    Test Manifest class.

    """

    def test_init(self, test_manifest):
        assert len(test_manifest) == 15
        assert test_manifest.speaker("s2-u1") == "s2"
        assert test_manifest.path("s2-u1") == "wav/s2-u1.wav"
        assert test_manifest.speaker_ids() == ["s0", "s1", "s2", "s3", "s4"]

    def test_dict(self, test_manifest):
        manifest = Manifest(test_manifest.get())
        assert manifest.uids == test_manifest.uids
        assert manifest.speakers() == test_manifest.speakers()

    def test_invalid(self):
        with pytest.raises(ConfigError):
            Manifest(data={"u": {"speaker": "s"}}, uids=["u"])

    def test_split(self, test_manifest):
        first, second = test_manifest.split_speakers(seed=0)
        assert len(first.speaker_ids()) == 3
        assert len(second.speaker_ids()) == 2
        assert not set(first.speaker_ids()) & set(second.speaker_ids())
        assert len(first) + len(second) == len(test_manifest)
        again, _ = test_manifest.split_speakers(seed=0)
        assert again.uids == first.uids

    def test_split_single(self):
        manifest = Manifest.from_entries([("u0", "s", "a.wav"), ("u1", "s", "b.wav")])
        with pytest.raises(InsufficientDataError):
            manifest.split_speakers()

    def test_write_read(self, test_manifest, test_path):
        directory = f"{test_path}/lists"
        os.makedirs(directory, exist_ok=True)
        filename = f"{directory}/manifest.txt"
        test_manifest.write(filename)
        assert corpus.count_entries(filename) == 15
        with open(filename) as f:
            line = f.readline().split()
        assert line[0] == "s0-u0"
        assert not os.path.isabs(line[2])

        manifest = Manifest.read(filename)
        assert manifest.uids == test_manifest.uids
        assert manifest.path("s0-u0") == os.path.abspath("wav/s0-u0.wav")


class TestTrials:
    """
    Test the trial construction.

    """

    def test_make_trials(self, test_manifest):
        trials = corpus.make_trials(test_manifest)
        # 5 enrollments against 10 remaining utterances
        assert len(trials) == 50
        assert int(trials.is_target().sum()) == 10
        assert set(trials.enroll) == {f"s{s}-u0" for s in range(5)}
        assert not set(trials.enroll) & set(trials.test)

    def test_insufficient(self):
        with pytest.raises(InsufficientDataError):
            corpus.make_trials(Manifest.from_entries([("u0", "s", "a.wav"), ("u1", "s", "b.wav")]))
        with pytest.raises(InsufficientDataError):
            corpus.make_trials(Manifest.from_entries([("u0", "s", "a.wav"), ("u1", "t", "b.wav")]))


class TestCorpus:
    """
    Test the synthetic corpus.

    """

    @pytest.mark.parametrize("keywords", [{"n_speakers": 1}, {"utterances": 1}, {"duration": 0.0}])
    def test_spec(self, keywords):
        with pytest.raises(ConfigError):
            CorpusSpec(**keywords)

    def test_clean(self):
        spec = CorpusSpec(duration=0.5, t60=None, snr_db=None)
        audio, clean = corpus.simulate_utterance(spec, SyntheticSpeaker("s"), 1, "u")
        np.testing.assert_allclose(audio.samples, clean.samples)

    def test_far_field(self):
        spec = CorpusSpec(duration=0.5, max_order=4)
        audio, clean = corpus.simulate_utterance(spec, SyntheticSpeaker("s"), 1, "u")
        assert len(audio) == len(clean)
        assert np.max(np.abs(audio.samples)) <= 0.9 + 1e-12
        assert not np.allclose(audio.samples, clean.samples)

    def test_generate(self, test_corpus, test_path):
        assert len(test_corpus) == 4
        assert test_corpus.speaker_ids() == ["spk00", "spk01"]
        assert os.path.isfile(f"{test_path}/corpus/manifest.txt")
        audio = AudioBuffer.read(test_corpus.path("spk01-u01"), uid="spk01-u01")
        assert audio.sample_rate == 16000
        assert audio.uid == "spk01-u01"
        assert test_corpus.path("spk01-u01").endswith("spk01-u01.wav")
        assert len(audio) == 8000

    def test_reproducible(self, test_corpus, test_path):
        spec = CorpusSpec(n_speakers=2, utterances=2, duration=0.5, max_order=4, seed=3)
        again = corpus.generate_corpus(spec, f"{test_path}/again")
        for uid in test_corpus.uids:
            np.testing.assert_array_equal(
                AudioBuffer.read(test_corpus.path(uid)).samples, AudioBuffer.read(again.path(uid)).samples
            )

    def test_benchmark_config(self, monkeypatch, test_path):
        requested = dict()

        def corpora(directory, seed=0, verbose=False):
            requested.update(directory=directory, seed=seed)
            return {split: f"{directory}/{split}/manifest.txt" for split in ("train", "dev", "eval")}

        monkeypatch.setattr(corpus, "benchmark_corpora", corpora)
        config = corpus.benchmark_config(f"{test_path}/bench", seed=4, preset="toy")
        assert config.name == "benchmark"
        assert config.seed == 4
        assert config.output == f"{test_path}/bench/output"
        assert config.manifests["dev"] == f"{test_path}/bench/corpus/dev/manifest.txt"
        assert requested == {"directory": f"{test_path}/bench/corpus", "seed": 4}
        assert [e["name"] for e in config.extractors] == ["ivector", "toy-asoftmax", "toy-softmax"]

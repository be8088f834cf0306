#!/usr/bin/env python3
"""
corpus.py

Utterance manifests, trial list construction and the synthetic
far-field benchmark corpus.

"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

import numpy as np
from tqdm import tqdm  # type: ignore

from farfieldsv import augment
from farfieldsv.audio import AudioBuffer
from farfieldsv.data import Data
from farfieldsv.exceptions import ConfigError, InsufficientDataError
from farfieldsv.suite import Suite, default_rng
from farfieldsv.trials import TrialList, read_columns

message = Suite.message


class Manifest(Data):
    """
    farfieldsv manifest class.
    Utterance id keyed speaker labels and WAV paths.

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
        for uid in self.uids:
            entry = self.data[uid]
            if set(entry) != {"speaker", "path"}:
                raise ConfigError(f"manifest entry '{uid}' needs a speaker and a path")

    def get(self) -> dict:
        """
        Assigns class variables from inherited dictionary.

        """
        d = super().get()
        d["type"] = self.__class__.__name__
        return d

    @classmethod
    def from_entries(cls, entries: list[tuple[str, str, str]]) -> Manifest:
        """
        Build from ``(utterance, speaker, path)`` tuples.

        """
        return cls(
            data={uid: {"speaker": speaker, "path": path} for uid, speaker, path in entries},
            uids=[uid for uid, _, _ in entries],
        )

    def speaker(self, uid: str) -> str:
        return self.data[uid]["speaker"]

    def path(self, uid: str) -> str:
        return self.data[uid]["path"]

    def speakers(self) -> dict[str, str]:
        """
        Utterance id to speaker map.

        """
        return {uid: self.data[uid]["speaker"] for uid in self.uids}

    def speaker_ids(self) -> list[str]:
        """
        Distinct speakers in order of appearance.

        """
        return list(dict.fromkeys(self.data[uid]["speaker"] for uid in self.uids))

    def subset(self, uids: list[str]) -> Manifest:
        return Manifest(data={uid: dict(self.data[uid]) for uid in uids}, uids=list(uids))

    def split_speakers(self, seed: Optional[int] = 0) -> tuple[Manifest, Manifest]:
        """
        Two manifests over disjoint halves of the speakers, drawn with a
        fixed seed; the first half gets the extra speaker of an odd count.

        """
        speakers = self.speaker_ids()
        if len(speakers) < 2:
            raise InsufficientDataError(f"cannot split {len(speakers)} speaker(s) in two")

        order = default_rng(seed, 11).permutation(len(speakers))
        first = {speakers[i] for i in order[: (len(speakers) + 1) // 2]}

        return (
            self.subset([uid for uid in self.uids if self.speaker(uid) in first]),
            self.subset([uid for uid in self.uids if self.speaker(uid) not in first]),
        )

    def write(self, filename: str, verbose: bool = False) -> None:
        """
        Write ``utterance speaker path`` lines, paths relative to the
        manifest's directory.

        """
        from astropy.io import ascii  # type: ignore
        from astropy.table import Table  # type: ignore

        root = os.path.dirname(os.path.abspath(filename))
        paths = [os.path.relpath(os.path.abspath(self.path(uid)), root) for uid in self.uids]

        tbl = Table(
            [self.uids, [self.speaker(uid) for uid in self.uids], paths],
            names=["utterance", "speaker", "path"],
        )
        ascii.write(tbl, filename, format="no_header", delimiter=" ", overwrite=True)

        if verbose:
            message(f"WRITTEN: {filename}")

    @classmethod
    def read(cls, filename: str) -> Manifest:
        """
        Read a manifest; relative paths are taken relative to the
        manifest's directory.

        """
        names = ["utterance", "speaker", "path"]
        data = read_columns(filename, names, names)

        root = os.path.dirname(os.path.abspath(filename))
        return cls.from_entries(
            [
                (str(uid), str(speaker), os.path.normpath(os.path.join(root, str(path))))
                for uid, speaker, path in zip(data["utterance"], data["speaker"], data["path"])
            ]
        )


def count_entries(filename: str) -> int:
    """
    Number of non-blank lines of a manifest file.

    """
    with open(filename) as f:
        return sum(1 for line in f if line.strip())


def make_trials(manifest: Manifest) -> TrialList:
    """
    Enroll the first utterance of every speaker against every remaining
    utterance of the manifest.

    """
    enrollments = list()
    seen = set()
    for uid in manifest.uids:
        speaker = manifest.speaker(uid)
        if speaker not in seen:
            seen.add(speaker)
            enrollments.append(uid)

    tests = [uid for uid in manifest.uids if uid not in set(enrollments)]
    if not tests or len(enrollments) < 2:
        raise InsufficientDataError("trial construction needs two speakers and a test utterance")

    enroll, test = list(), list()
    for e in enrollments:
        for t in tests:
            enroll.append(e)
            test.append(t)

    return TrialList.from_speakers(enroll, test, manifest.speakers())


@dataclass(frozen=True)
class CorpusSpec:
    """
    Synthetic far-field corpus: speech-like utterances of random talkers,
    reverberated in random rooms and mixed with colored noise.
    ``t60=None`` skips the room and ``snr_db=None`` the noise.

    """

    n_speakers: int = 8
    utterances: int = 10
    duration: float = 2.0
    sample_rate: int = 16000
    t60: Optional[float] = 0.3
    snr_db: Optional[float] = 10.0
    noise_exponent: float = 1.0
    max_order: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_speakers < 2:
            raise ConfigError(f"Need at least two speakers, got {self.n_speakers}")
        if self.utterances < 2:
            raise ConfigError(f"Need at least two utterances per speaker, got {self.utterances}")
        if not self.duration > 0:
            raise ConfigError(f"Invalid duration: {self.duration}")


def simulate_utterance(
    spec: CorpusSpec, speaker: augment.SyntheticSpeaker, seed: int, uid: str
) -> tuple[AudioBuffer, AudioBuffer]:
    """
    One far-field utterance and its clean source.

    """
    clean = augment.speech_like(spec.duration, speaker, spec.sample_rate, seed=seed, uid=uid)

    audio = clean
    if spec.t60 is not None:
        room = augment.random_room(
            default_rng(seed, 1), t60=spec.t60, sample_rate=spec.sample_rate, max_order=spec.max_order
        )
        reverberant = augment.convolve_rir(clean, augment.ism_rir(room))
        audio = clean.copy(samples=reverberant.samples[: len(clean)])

    if spec.snr_db is not None:
        noise = augment.colored_noise(
            len(audio), spec.noise_exponent, spec.sample_rate, seed=seed + 2
        )
        audio = augment.mix_at_snr(audio, noise, spec.snr_db, seed=seed)

    peak = np.max(np.abs(audio.samples))
    if peak > 0.9:
        audio = audio.copy(samples=0.9 * audio.samples / peak)

    return audio, clean


def generate_corpus(
    spec: CorpusSpec, directory: str, prefix: str = "spk", verbose: bool = False
) -> Manifest:
    """
    Write the WAV files and the ``manifest.txt`` of a synthetic corpus.

    Parameters:
        spec : CorpusSpec
        directory : str
            Output directory, created when needed.
        prefix : str
            Speaker id prefix, keeps corpora of different splits apart.

    Returns:
        The manifest of the written utterances.

    """
    os.makedirs(directory, exist_ok=True)
    rng = default_rng(spec.seed)

    entries = list()
    bar = tqdm(
        total=spec.n_speakers * spec.utterances,
        desc=f"{prefix} corpus",
        unit="utterance",
        colour="blue",
        disable=not verbose,
    )
    for s in range(spec.n_speakers):
        speaker_id = f"{prefix}{s:02d}"
        speaker = augment.random_speaker(rng, speaker_id)
        for u in range(spec.utterances):
            uid = f"{speaker_id}-u{u:02d}"
            seed = spec.seed * 100003 + s * 1009 + u * 17
            audio, _ = simulate_utterance(spec, speaker, seed, uid)
            path = os.path.join(directory, f"{uid}.wav")
            audio.write(path)
            entries.append((uid, speaker_id, path))
            bar.update()
    bar.close()

    manifest = Manifest.from_entries(entries)
    manifest.write(os.path.join(directory, "manifest.txt"), verbose=verbose)

    return manifest


def benchmark_corpora(
    directory: str,
    seed: int = 0,
    train_speakers: int = 20,
    test_speakers: int = 8,
    utterances: int = 10,
    t60: float = 0.6,
    snr_db: float = 10.0,
    verbose: bool = False,
) -> dict[str, str]:
    """
    Generate the train, dev and eval corpora of the far-field benchmark,
    with disjoint speakers.

    Returns:
        Split name to manifest file.

    """
    sizes = {"train": train_speakers, "dev": test_speakers, "eval": test_speakers}
    manifests = dict()
    for offset, (split, n) in enumerate(sizes.items()):
        spec = CorpusSpec(
            n_speakers=n,
            utterances=utterances,
            t60=t60,
            snr_db=snr_db,
            seed=seed + 1000 * (offset + 1),
        )
        generate_corpus(spec, os.path.join(directory, split), prefix=f"{split}-spk", verbose=verbose)
        manifests[split] = os.path.join(directory, split, "manifest.txt")
    return manifests


def benchmark_config(directory: str, seed: int = 0, preset: str = "toy", verbose: bool = False):
    """
    Generate the benchmark corpora under ``directory`` and return the
    experiment configuration running i-vector and toy neural systems,
    with and without WPE.

    """
    from farfieldsv.config import ExperimentConfig

    manifests = benchmark_corpora(os.path.join(directory, "corpus"), seed=seed, verbose=verbose)
    return ExperimentConfig.preset(
        preset,
        name="benchmark",
        seed=seed,
        output=os.path.join(directory, "output"),
        manifests=manifests,
    )

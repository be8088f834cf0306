#!/usr/bin/env python3
"""
pipeline.py

End-to-end far-field verification experiments: optional dereverberation,
features, i-vector and toy neural embeddings, back-ends, AS-Norm,
calibration, fusion and evaluation, with every stage artifact cached.

"""

from __future__ import annotations

import json
import multiprocessing
import os
import time
import warnings
from dataclasses import asdict, replace
from datetime import timedelta
from functools import partial
from typing import Any, Callable, Optional, Sequence

from tqdm import tqdm  # type: ignore

from farfieldsv import dsp
from farfieldsv.audio import AudioBuffer
from farfieldsv.backend import Backend
from farfieldsv.calibration import (
    CalibrationParams,
    calibrate_fit,
    cllr,
    fuse,
    select_subsystems,
    write_params,
)
from farfieldsv.config import SPLITS, ExperimentConfig, validate_config
from farfieldsv.corpus import Manifest, make_trials
from farfieldsv.dereverb import WpeConfig, wpe_dereverberate
from farfieldsv.embedder import ToyEmbedNet, TrainConfig, extract_embedding, train_toy
from farfieldsv.embeddings import Embeddings
from farfieldsv.exceptions import FormatError, FsvError, StageError
from farfieldsv.featurematrix import FeatureMatrix
from farfieldsv.features import FeatureConfig, extract
from farfieldsv.gmm import accumulate_bw_stats, ubm_train_em
from farfieldsv.ivector import TotalVariabilityModel, extract_ivector, train_tmatrix_em
from farfieldsv.metrics import DcfParams, act_dcf, det_points, eer, min_dcf, plot_det
from farfieldsv.scorenorm import normalize_trial_set
from farfieldsv.suite import Suite
from farfieldsv.trials import LabeledScoreSet, ScoreSet

message = Suite.message

METRICS = ("minC", "actC", "EER", "Cllr")
GAINS = ("minC", "actC", "EER")
FUSION = "fusion"
ANNEALING = ("anneal", "lambda_min", "lambda_max", "lambda_decay")


def evaluate(
    raw: LabeledScoreSet,
    calibrated: Optional[LabeledScoreSet] = None,
    params: Optional[DcfParams] = None,
) -> dict[str, float]:
    """
    minC and EER[%] of the raw scores, actC and Cllr of the calibrated
    ones (the raw scores when not given).

    """
    calibrated = calibrated or raw
    return {
        "minC": min_dcf(raw, params)[0],
        "actC": act_dcf(calibrated, params),
        "EER": 100.0 * eer(raw),
        "Cllr": cllr(calibrated),
    }


def relative_gains(original: dict[str, float], dereverberated: dict[str, float]) -> dict[str, float]:
    """
    (metric_orig − metric_wpe)/metric_orig of minC, actC and EER.

    """
    return {
        key: (original[key] - dereverberated[key]) / original[key] if original[key] > 0 else 0.0
        for key in GAINS
    }


def system_name(extractor: str, wpe: bool, backend: str, asnorm: bool) -> str:
    return f"{extractor}{'+wpe' if wpe else ''}:{backend}{'+asnorm' if asnorm else ''}"


def _filename(system: str) -> str:
    return system.replace(":", "_").replace("/", "_")


def _guarded(stage: str, func: Callable, item: Any) -> Any:
    # Per-utterance failures carry the stage and the utterance id.
    try:
        return func(item)
    except FsvError as e:
        raise StageError(stage, e, uid=getattr(item, "uid", None)) from e


def _features(audio: AudioBuffer, config: FeatureConfig) -> FeatureMatrix:
    if config.sample_rate == 8000 and audio.sample_rate == 16000:
        audio = dsp.resample_to_8k(audio)
    return extract(audio, config)


class Report:
    """
    farfieldsv report class.
    Metrics of every system and of the fusion on the dev and eval trials,
    and the relative gains of the dereverberated variants.

    """

    def __init__(self, d: Optional[dict] = None, **keywords) -> None:
        """
        Initialize Report class.

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
        self.name = keywords.get("name", "")
        self.results = keywords.get("results", {"dev": dict(), "eval": dict()})
        self.gains = keywords.get("gains", dict())
        self.fusion = list(keywords.get("fusion", list()))

        if isinstance(d, dict):
            if d.get("type", "") == self.__class__.__name__:
                if "name" not in keywords:
                    self.name = d["name"]
                if "results" not in keywords:
                    self.results = d["results"]
                if "gains" not in keywords:
                    self.gains = d["gains"]
                if "fusion" not in keywords:
                    self.fusion = list(d["fusion"])

    def get(self) -> dict:
        """
        Return data dictionary with expected keywords.

        """
        return {
            "type": self.__class__.__name__,
            "name": self.name,
            "results": self.results,
            "gains": self.gains,
            "fusion": self.fusion,
        }

    def __repr__(self) -> str:
        """
        Class representation.

        """
        return f"{self.__class__.__name__}({self.name=},{len(self.systems())} systems)"

    def __str__(self) -> str:
        """
        A description of the instance.
        """

        return "farfieldsv Report instance.\n" + "\n".join(self.lines())

    def systems(self) -> list[str]:
        return list(self.results["dev"].keys())

    def best(self, groups: Sequence[str], metric: str = "EER") -> float:
        """
        Lowest metric over the back-ends of every extractor variant in
        groups (the system name before ':'), averaged over the variants
        and over dev and eval.

        Parameters:
            groups : sequence of str
                Extractor variants, e.g. ``["ivector", "ivector+wpe"]``.
            metric : str

        """
        values = list()
        for group in groups:
            for split in ("dev", "eval"):
                found = [m[metric] for s, m in self.results[split].items() if s.split(":")[0] == group]
                if not found:
                    raise KeyError(f"no {split} systems for '{group}'")
                values.append(min(found))
        return float(sum(values) / len(values))

    def lines(self) -> list[str]:
        """
        Text table with dev and eval minC, actC, EER[%] and Cllr columns.

        """
        width = max([len(s) for s in self.systems()] + [len("system")])
        columns = " ".join(f"{m:>7}" for m in ("minC", "actC", "EER[%]", "Cllr"))
        lines = [
            f"{'':{width}} | {'dev':^31} | {'eval':^31}",
            f"{'system':{width}} | {columns} | {columns}",
        ]
        for system in self.systems():
            row = [f"{system:{width}}"]
            for split in ("dev", "eval"):
                metrics = self.results[split][system]
                row.append(" ".join(f"{metrics[m]:7.4f}" if m != "EER" else f"{metrics[m]:7.2f}" for m in METRICS))
            lines.append(" | ".join(row))
        return lines

    def write(self, directory: str) -> None:
        """
        Write ``report.json`` and the ``report.tbl`` IPAC-table.

        """
        from astropy.io import ascii  # type: ignore
        from astropy.table import Table  # type: ignore

        os.makedirs(directory, exist_ok=True)

        filename = os.path.join(directory, "report.json")
        with open(filename, "w") as f:
            json.dump(self.get(), f, indent=2)
            f.write("\n")
        message(f"WRITTEN: {filename}")

        systems = self.systems()
        columns = [systems]
        names = ["system"]
        for split in ("dev", "eval"):
            for m in METRICS:
                columns.append([self.results[split][s][m] for s in systems])
                names.append(f"{split}_{m}")

        tbl = Table(columns, names=names, meta={"comments": Suite.header("Report", name=self.name)})
        for name in names[1:]:
            tbl[name].format = "%.6f"

        filename = os.path.join(directory, "report.tbl")
        ascii.write(tbl, filename, format="ipac", overwrite=True)
        message(f"WRITTEN: {filename}")

    @classmethod
    def read(cls, filename: str) -> Report:
        """
        Read a ``report.json``.

        """
        try:
            with open(filename) as f:
                return cls(json.load(f))
        except (json.JSONDecodeError, KeyError) as e:
            raise FormatError(f"{filename}: {e}") from e


class Pipeline:
    """
    Experiment runner. Artifacts (dereverberated audio, features, models
    and embeddings) are cached under the content hash of their stage
    settings and inputs.

    """

    def __init__(self, config: ExperimentConfig, verbose: bool = True) -> None:
        self.config = config
        self.verbose = verbose
        self.cachedir = Suite.cachedir(config.output)
        self.dcf = DcfParams(
            p_target=config.calibration.get("p_target", 0.01),
            c_miss=config.calibration.get("c_miss", 1.0),
            c_fa=config.calibration.get("c_fa", 1.0),
        )
        wpe = {k: v for k, v in config.wpe.items() if k != "variants"}
        self.wpe_config = WpeConfig(**wpe)
        self._memo: dict[tuple, Any] = dict()

    def _cached(self, stage: str, key: str, compute: Callable[[], Any]) -> Any:
        if (stage, key) in self._memo:
            return self._memo[(stage, key)]
        try:
            artifact = Suite.cached(self.cachedir, key, stage, compute, cache=self.config.cache)
        except StageError:
            raise
        except FsvError as e:
            raise StageError(stage, e) from e
        self._memo[(stage, key)] = artifact
        return artifact

    def _map(self, stage: str, func: Callable, items: Sequence) -> list:
        func = partial(_guarded, stage, func)
        if self.config.multiprocessing:
            ncores = self.config.ncores or multiprocessing.cpu_count()
            if self.verbose:
                message(f"USING MULTIPROCESSING WITH {ncores} CORES")
            with multiprocessing.Pool(ncores) as pool:
                return pool.map(func, items)
        return [
            func(item)
            for item in tqdm(
                items, desc=stage, unit="utterance", colour="blue", leave=False, disable=not self.verbose
            )
        ]

    def load(self) -> None:
        """
        Read the manifests and the audio, split the dev speakers and
        build the trial lists.

        """
        self.manifests = dict()
        self.audio = dict()
        self.hashes = dict()
        self.speakers = dict()

        for split in SPLITS:
            try:
                manifest = Manifest.read(self.config.manifests[split])
            except FsvError as e:
                raise StageError("manifests", e) from e
            audio = list()
            for uid in manifest.uids:
                try:
                    audio.append(AudioBuffer.read(manifest.path(uid), uid=uid))
                except (FsvError, OSError) as e:
                    raise StageError("audio", e, uid=uid) from e
            self.manifests[split] = manifest
            self.audio[split] = audio
            self.speakers.update(manifest.speakers())
            self.hashes[split] = Suite.contenthash(
                manifest.uids,
                manifest.speakers(),
                *[Suite.filehash(manifest.path(uid)) for uid in manifest.uids],
            )

        try:
            self.trial_half, self.adapt_half = self.manifests["dev"].split_speakers(self.config.seed)
            self.trials = {
                "dev": make_trials(self.trial_half),
                "eval": make_trials(self.manifests["eval"]),
            }
        except FsvError as e:
            raise StageError("trials", e) from e

    def audio_key(self, split: str, wpe: bool) -> str:
        return Suite.contenthash(self.hashes[split], asdict(self.wpe_config) if wpe else None)

    def dereverberated(self, split: str, wpe: bool) -> list[AudioBuffer]:
        """
        Audio of a split, dereverberated when ``wpe`` is set.

        """
        if not wpe:
            return self.audio[split]
        return self._cached(
            f"dereverb-{split}",
            self.audio_key(split, wpe),
            lambda: self._map("dereverb", partial(wpe_dereverberate, config=self.wpe_config), self.audio[split]),
        )

    def feature_key(self, kind: str, split: str, wpe: bool) -> str:
        return Suite.contenthash(asdict(FeatureConfig.preset(kind)), self.audio_key(split, wpe))

    def features(self, kind: str, split: str, wpe: bool) -> list[FeatureMatrix]:
        config = FeatureConfig.preset(kind)
        return self._cached(
            f"features-{kind}-{split}{'-wpe' if wpe else ''}",
            self.feature_key(kind, split, wpe),
            lambda: self._map("features", partial(_features, config=config), self.dereverberated(split, wpe)),
        )

    def model_key(self, extractor: dict, wpe: bool) -> str:
        return Suite.contenthash(
            extractor, self.config.seed, self.feature_key(extractor["features"], "train", wpe)
        )

    def train_ivector(self, extractor: dict, wpe: bool) -> TotalVariabilityModel:
        """
        UBM and total variability matrix on the training split.

        """
        seed = self.config.seed

        def compute():
            train = self.features(extractor["features"], "train", wpe)
            ubm = ubm_train_em(
                train,
                extractor["components"],
                iterations=extractor.get("ubm_iterations", 10),
                seed=seed,
                verbose=self.verbose,
            )
            stats = [accumulate_bw_stats(ubm, f, uid=f.uid) for f in train]
            return train_tmatrix_em(
                ubm,
                stats,
                extractor["rank"],
                iterations=extractor.get("tv_iterations", 5),
                seed=seed,
                verbose=self.verbose,
            )

        suffix = "-wpe" if wpe else ""
        return self._cached(f"ivector-{extractor['name']}{suffix}", self.model_key(extractor, wpe), compute)

    def train_toy(self, extractor: dict, wpe: bool) -> ToyEmbedNet:
        """
        Toy neural embedder on the training split.

        """

        def compute():
            train = self.features(extractor["features"], "train", wpe)
            labels = [self.speakers[f.uid] for f in train]
            net = ToyEmbedNet(
                input_dim=train[0].dim,
                hidden=extractor.get("hidden", 64),
                embed_dim=extractor.get("embed_dim", 256),
                n_speakers=len(set(labels)),
                pooling=extractor.get("pooling", "mean_std"),
                seed=self.config.seed,
            )
            config = TrainConfig(
                learning_rate=extractor.get("learning_rate", 0.01),
                steps=extractor.get("steps", 200),
                batch_size=extractor.get("batch_size", 16),
                loss=extractor.get("loss", "asoftmax"),
                margin=extractor.get("margin", 4),
                seed=self.config.seed,
                **{key: extractor[key] for key in ANNEALING if key in extractor},
            )
            return train_toy(net, train, labels, config, verbose=self.verbose)

        suffix = "-wpe" if wpe else ""
        return self._cached(f"embedder-{extractor['name']}{suffix}", self.model_key(extractor, wpe), compute)

    def embeddings(self, extractor: dict, split: str, wpe: bool) -> Embeddings:
        """
        Embeddings of every utterance of a split.

        """
        name = extractor["name"]

        if extractor["type"] == "ivector":
            model: Any = self.train_ivector(extractor, wpe)

            def embed(f):
                return extract_ivector(model, accumulate_bw_stats(model.ubm, f, uid=f.uid))

        else:
            model = self.train_toy(extractor, wpe)

            def embed(f):
                return extract_embedding(model, f, uid=f.uid)

        def compute():
            vectors = list()
            for f in self.features(extractor["features"], split, wpe):
                try:
                    vectors.append(replace(embed(f), extractor=name, dereverb=wpe))
                except FsvError as e:
                    raise StageError("embeddings", e, uid=f.uid) from e
            return Embeddings.from_list(vectors, speakers=self.speakers)

        key = Suite.contenthash(
            self.model_key(extractor, wpe), self.feature_key(extractor["features"], split, wpe)
        )
        suffix = "-wpe" if wpe else ""
        return self._cached(f"embeddings-{name}{suffix}-{split}", key, compute)

    def score(self, extractor: dict, wpe: bool) -> dict[str, dict[str, ScoreSet]]:
        """
        Dev and eval scores of every back-end on one extractor variant.

        Returns:
            Split to system name to scores.

        """
        train = self.embeddings(extractor, "train", wpe)
        dev = self.embeddings(extractor, "dev", wpe)
        evaluation = self.embeddings(extractor, "eval", wpe)
        adapt = dev.subset(self.adapt_half.uids)
        trial_embeddings = {"dev": dev.subset(self.trial_half.uids), "eval": evaluation}

        asnorm = self.config.asnorm.get("enabled", False)
        top_x = self.config.asnorm.get("top_x", 10)

        scores: dict[str, dict[str, ScoreSet]] = {"dev": dict(), "eval": dict()}
        for section in self.config.backends:
            backend = Backend(**section)
            system = system_name(extractor["name"], wpe, backend.name, asnorm)
            try:
                backend.fit(train, adapt=adapt)
                for split in ("dev", "eval"):
                    trials = self.trials[split]
                    embeddings = trial_embeddings[split]
                    E, T = embeddings.matrix(trials.enroll), embeddings.matrix(trials.test)
                    raw = ScoreSet(
                        trials=trials,
                        scores=backend.score_pairs(E, T),
                        system=system,
                    )
                    if asnorm:
                        raw = normalize_trial_set(raw, embeddings, adapt, backend.score_pairs, top_x)
                    scores[split][system] = raw
            except StageError:
                raise
            except FsvError as e:
                raise StageError(f"backend {system}", e) from e

        return scores

    def write_scores(self, split: str, scores: ScoreSet) -> None:
        directory = os.path.join(self.config.output, "scores", split)
        os.makedirs(directory, exist_ok=True)
        scores.write(os.path.join(directory, f"{_filename(scores.system)}.txt"))

    def run(self) -> Report:
        """
        Execute every configured stage and write scores, calibration,
        report and DET plots to the output directory.

        """
        tstart = time.perf_counter()

        if self.verbose:
            Suite.intro()

        self.load()

        scores: dict[str, dict[str, ScoreSet]] = {"dev": dict(), "eval": dict()}
        for wpe in self.config.wpe.get("variants", [False]):
            for extractor in self.config.extractors:
                system_scores = self.score(extractor, wpe)
                for split in ("dev", "eval"):
                    scores[split].update(system_scores[split])

        for split in ("dev", "eval"):
            for system_scores in scores[split].values():
                self.write_scores(split, system_scores)

        try:
            report, labeled = self.calibrate_and_fuse(scores)
        except FsvError as e:
            raise StageError("calibration", e) from e

        report.write(self.config.output)

        if self.config.det:
            for split in ("dev", "eval"):
                plot_det(
                    [det_points(labeled[split][system]) for system in report.systems()],
                    save=os.path.join(self.config.output, f"det_{split}.svg"),
                    title=f"{self.config.name} {split}",
                )

        if self.verbose:
            message(report.lines(), space=max(len(line) for line in report.lines()))
            elapsed = timedelta(seconds=(time.perf_counter() - tstart))
            message(f"PIPELINE DONE IN {elapsed}")

        return report

    def calibrate_and_fuse(
        self, scores: dict[str, dict[str, ScoreSet]]
    ) -> tuple[Report, dict[str, dict[str, LabeledScoreSet]]]:
        """
        Calibrate every system on the dev trials, fuse the top back-ends
        of every extractor and evaluate dev and eval.

        """
        labeled = {split: {s: v.labeled() for s, v in scores[split].items()} for split in ("dev", "eval")}

        params: dict[str, CalibrationParams] = dict()
        results: dict[str, dict[str, dict[str, float]]] = {"dev": dict(), "eval": dict()}
        for system, dev in labeled["dev"].items():
            params[system] = calibrate_fit(dev, prior=self.dcf.effective_prior)
            for split in ("dev", "eval"):
                raw = labeled[split][system]
                results[split][system] = evaluate(
                    raw, raw.transformed(params[system].apply(raw.scores)), self.dcf
                )
                calibrated, uncalibrated = results[split][system]["Cllr"], cllr(raw)
                if calibrated > uncalibrated:
                    warnings.warn(
                        f"Calibrated {split} Cllr of '{system}' ({calibrated:.4f}) exceeds its raw Cllr "
                        f"({uncalibrated:.4f})",
                        RuntimeWarning,
                    )

        selected = select_subsystems(
            labeled["dev"],
            k=self.config.calibration.get("top_k", 1),
            group=lambda name: name.split(":")[0],
            params=self.dcf,
        )

        for split in ("dev", "eval"):
            fused = fuse([scores[split][s] for s in selected], [params[s] for s in selected], system=FUSION)
            self.write_scores(split, fused)
            labeled[split][FUSION] = fused.labeled()
            results[split][FUSION] = evaluate(labeled[split][FUSION], params=self.dcf)

        write_params(
            os.path.join(self.config.output, "calibration.json"), list(params.values()), verbose=self.verbose
        )

        gains = dict()
        for system in results["dev"]:
            if system == FUSION or "+wpe:" in system:
                continue
            variant = system.replace(":", "+wpe:", 1)
            if variant in results["dev"]:
                gains[system] = {
                    split: relative_gains(results[split][system], results[split][variant])
                    for split in ("dev", "eval")
                }

        report = Report(name=self.config.name, results=results, gains=gains, fusion=selected)

        return report, labeled


def run_pipeline(config: ExperimentConfig, verbose: bool = True) -> Report:
    """
    Validate the configuration and run the experiment.

    Parameters:
        config : ExperimentConfig
        verbose : bool

    Returns:
        The experiment report, also written to the output directory.

    Raises:
        ConfigValidationError on an invalid configuration and StageError
        naming the failed stage.

    """
    validate_config(config)
    os.makedirs(config.output, exist_ok=True)
    return Pipeline(config, verbose=verbose).run()

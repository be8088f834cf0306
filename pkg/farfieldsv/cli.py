#!/usr/bin/env python3
"""
cli.py

The ``fsv`` command line: one subcommand per toolkit operation and
``fsv run`` for complete experiments.

"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional, Sequence

from tqdm import tqdm  # type: ignore

from farfieldsv.exceptions import ConfigError, ConfigValidationError, FsvError, StageError
from farfieldsv.suite import Suite

message = Suite.message


def _stem(filename: str) -> str:
    return os.path.splitext(os.path.basename(filename))[0]


def _manifest_features(filename: str, kind: str, verbose: bool = True) -> list:
    from farfieldsv.audio import AudioBuffer
    from farfieldsv.corpus import Manifest
    from farfieldsv.features import FeatureConfig
    from farfieldsv.pipeline import _features

    manifest = Manifest.read(filename)
    config = FeatureConfig.preset(kind)
    return [
        _features(AudioBuffer.read(manifest.path(uid), uid=uid), config)
        for uid in tqdm(manifest.uids, desc=kind, unit="utterance", colour="blue", disable=not verbose)
    ]


def cmd_extract(args: argparse.Namespace) -> None:
    from farfieldsv.audio import AudioBuffer
    from farfieldsv.features import FeatureConfig
    from farfieldsv.pipeline import _features

    audio = AudioBuffer.read(args.input)
    _features(audio, FeatureConfig.preset(args.kind)).write(args.out, verbose=True)


def cmd_wpe(args: argparse.Namespace) -> None:
    from farfieldsv.audio import AudioBuffer
    from farfieldsv.dereverb import WpeConfig, wpe_dereverberate

    config = WpeConfig(taps=args.taps, delay=args.delay, iterations=args.iters)
    wpe_dereverberate(AudioBuffer.read(args.input), config).write(args.out, verbose=True)


def cmd_train_ubm(args: argparse.Namespace) -> None:
    from farfieldsv.gmm import ubm_train_em

    features = _manifest_features(args.manifest, args.kind)
    ubm = ubm_train_em(features, args.components, iterations=args.iterations, seed=args.seed, verbose=True)
    ubm.write(args.out, verbose=True)


def cmd_train_tv(args: argparse.Namespace) -> None:
    from farfieldsv.gmm import GmmUbm, accumulate_bw_stats
    from farfieldsv.ivector import train_tmatrix_em

    ubm = GmmUbm.read(args.ubm)
    stats = [accumulate_bw_stats(ubm, f, uid=f.uid) for f in _manifest_features(args.manifest, args.kind)]
    tv = train_tmatrix_em(ubm, stats, args.rank, iterations=args.iterations, seed=args.seed, verbose=True)
    tv.write(args.out, verbose=True)


def cmd_extract_ivector(args: argparse.Namespace) -> None:
    from farfieldsv.corpus import Manifest
    from farfieldsv.embeddings import Embeddings
    from farfieldsv.gmm import accumulate_bw_stats
    from farfieldsv.ivector import TotalVariabilityModel, extract_ivector

    tv = TotalVariabilityModel.read(args.model)
    vectors = [
        extract_ivector(tv, accumulate_bw_stats(tv.ubm, f, uid=f.uid))
        for f in _manifest_features(args.manifest, args.kind)
    ]
    speakers = Manifest.read(args.manifest).speakers()
    Embeddings.from_list(vectors, speakers=speakers).write(args.out, verbose=True)


def cmd_train_embedder(args: argparse.Namespace) -> None:
    from farfieldsv.corpus import Manifest
    from farfieldsv.embedder import ToyEmbedNet, TrainConfig, train_toy

    features = _manifest_features(args.manifest, args.kind)
    speakers = Manifest.read(args.manifest).speakers()
    labels = [speakers[f.uid] for f in features]
    net = ToyEmbedNet(
        input_dim=features[0].dim,
        hidden=args.hidden,
        embed_dim=args.embed_dim,
        n_speakers=len(set(labels)),
        pooling=args.pooling,
        seed=args.seed,
    )
    config = TrainConfig(
        learning_rate=args.learning_rate,
        steps=args.steps,
        batch_size=args.batch_size,
        loss=args.loss,
        margin=args.margin,
        seed=args.seed,
    )
    train_toy(net, features, labels, config, verbose=True).write(args.out, verbose=True)


def cmd_extract_embedding(args: argparse.Namespace) -> None:
    from farfieldsv.corpus import Manifest
    from farfieldsv.embedder import ToyEmbedNet, extract_embedding
    from farfieldsv.embeddings import Embeddings

    net = ToyEmbedNet.read(args.model)
    vectors = [extract_embedding(net, f) for f in _manifest_features(args.manifest, args.kind)]
    speakers = Manifest.read(args.manifest).speakers()
    Embeddings.from_list(vectors, speakers=speakers).write(args.out, verbose=True)


def cmd_score(args: argparse.Namespace) -> None:
    from farfieldsv.backend import Backend
    from farfieldsv.corpus import Manifest
    from farfieldsv.embeddings import Embeddings
    from farfieldsv.trials import ScoreSet, TrialList

    embeddings = Embeddings.read(args.embeddings)
    trials = TrialList.read(args.trials)

    if args.train:
        if not args.train_manifest:
            raise ConfigError("--train needs --train-manifest for the speaker labels")
        train = Embeddings.read(args.train, speakers=Manifest.read(args.train_manifest).speakers())
        backend = Backend(whitening="train", scoring=args.scoring, plda_rank=args.plda_rank).fit(train)
    else:
        if args.scoring == "plda":
            raise ConfigError("PLDA scoring needs --train embeddings")
        backend = Backend(whitening=None, scoring="cosine").fit(Embeddings())

    scores = backend.score_pairs(embeddings.matrix(trials.enroll), embeddings.matrix(trials.test))
    ScoreSet(trials=trials, scores=scores, system=_stem(args.out)).write(args.out)
    message(f"WRITTEN: {args.out}")


def cmd_asnorm(args: argparse.Namespace) -> None:
    from farfieldsv.scorenorm import normalize_with_table, read_cohort_scores
    from farfieldsv.trials import ScoreSet

    table = dict()
    for filename in args.cohort_scores:
        table.update(read_cohort_scores(filename))
    scores = ScoreSet.read(args.scores)
    normalize_with_table(scores, table, args.top_x).write(args.out)
    message(f"WRITTEN: {args.out}")


def cmd_calibrate(args: argparse.Namespace) -> None:
    from farfieldsv.calibration import calibrate_fit, write_params
    from farfieldsv.trials import ScoreSet, TrialList

    key = TrialList.read(args.key)
    params = [
        calibrate_fit(ScoreSet.read(filename, system=_stem(filename)).labeled(key), prior=args.prior)
        for filename in args.scores
    ]
    write_params(args.out, params, verbose=True)


def cmd_fuse(args: argparse.Namespace) -> None:
    from farfieldsv.calibration import fuse, read_params
    from farfieldsv.trials import ScoreSet

    params = {p.system: p for p in read_params(args.params)}
    scores = [ScoreSet.read(filename, system=_stem(filename)) for filename in args.scores]
    missing = [s.system for s in scores if s.system not in params]
    if missing:
        raise ConfigError(f"no calibration for {missing} in {args.params}")
    fuse(scores, [params[s.system] for s in scores], system=_stem(args.out)).write(args.out)
    message(f"WRITTEN: {args.out}")


def cmd_eval(args: argparse.Namespace) -> None:
    from farfieldsv.metrics import DcfParams, det_points, plot_det
    from farfieldsv.pipeline import Report, evaluate
    from farfieldsv.trials import ScoreSet, TrialList

    key = TrialList.read(args.key)
    params = DcfParams(p_target=args.p_target)
    labeled = [ScoreSet.read(filename, system=_stem(filename)).labeled(key) for filename in args.scores]

    results = {s.system: evaluate(s, params=params) for s in labeled}
    report = Report(name="eval", results={"dev": results, "eval": results})
    lines = report.lines()
    message(lines, space=max(len(line) for line in lines))

    if args.det:
        plot_det([det_points(s) for s in labeled], save=args.det)


def cmd_det(args: argparse.Namespace) -> None:
    from farfieldsv.metrics import det_points, plot_det
    from farfieldsv.trials import ScoreSet, TrialList

    key = TrialList.read(args.key)
    curves = [det_points(ScoreSet.read(f, system=_stem(f)).labeled(key)) for f in args.scores]
    if args.table:
        for curve in curves:
            curve.write(os.path.join(args.table, f"{curve.system}.tbl"))
    plot_det(curves, save=args.out, title=args.title)


def cmd_simulate_rir(args: argparse.Namespace) -> None:
    from farfieldsv.augment import RoomSpec, ism_rir

    room = RoomSpec.from_json(args.room)
    rir = ism_rir(room)
    peak = max(abs(rir.samples).max(), 1e-12)
    # PCM output: normalized to a unit peak, the raw amplitudes go to the table
    rir.copy(samples=0.99 * rir.samples / peak).write(args.out, verbose=True)


def cmd_augment(args: argparse.Namespace) -> None:
    from farfieldsv.audio import AudioBuffer
    from farfieldsv.augment import convolve_rir, mix_at_snr

    audio = AudioBuffer.read(args.input)
    n = len(audio)
    if args.rir:
        audio = convolve_rir(audio, AudioBuffer.read(args.rir))
        audio = audio.copy(samples=audio.samples[:n])
    if args.noise:
        audio = mix_at_snr(audio, AudioBuffer.read(args.noise), args.snr, seed=args.seed)
    audio.write(args.out, verbose=True)


def cmd_run(args: argparse.Namespace) -> None:
    from farfieldsv.config import ExperimentConfig
    from farfieldsv.corpus import benchmark_config
    from farfieldsv.pipeline import run_pipeline

    if args.benchmark:
        config = benchmark_config(args.benchmark, seed=args.seed, preset=args.preset, verbose=True)
        config.write(os.path.join(args.benchmark, "benchmark.json"), verbose=True)
    else:
        config = ExperimentConfig.read(args.config)
    if args.multiprocessing:
        config.multiprocessing = True
    run_pipeline(config)


def cmd_init_config(args: argparse.Namespace) -> None:
    from farfieldsv.config import reference_config

    reference_config().write(args.out, notes=True, verbose=True)


def build_parser() -> argparse.ArgumentParser:
    """
    The ``fsv`` argument parser.

    """
    from farfieldsv.embedder import LOSSES, POOLINGS
    from farfieldsv.features import PRESETS

    kinds = sorted(PRESETS)

    parser = argparse.ArgumentParser(
        prog="fsv",
        description="Far-field speaker verification toolkit.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        p.set_defaults(func=func)
        return p

    p = add("extract", cmd_extract, "extract features of a WAV file")
    p.add_argument("--kind", choices=kinds, required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)

    p = add("wpe", cmd_wpe, "dereverberate a WAV file")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--taps", type=int, default=10)
    p.add_argument("--delay", type=int, default=3)
    p.add_argument("--iters", type=int, default=3)

    p = add("train-ubm", cmd_train_ubm, "train a full-covariance UBM")
    p.add_argument("--manifest", required=True)
    p.add_argument("--kind", choices=kinds, default="mfcc20")
    p.add_argument("--components", type=int, default=64)
    p.add_argument("--iterations", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = add("train-tv", cmd_train_tv, "train the total variability matrix")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ubm", required=True)
    p.add_argument("--kind", choices=kinds, default="mfcc20")
    p.add_argument("--rank", type=int, default=100)
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = add("extract-ivector", cmd_extract_ivector, "extract i-vectors of a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--kind", choices=kinds, default="mfcc20")
    p.add_argument("--out", required=True)

    p = add("train-embedder", cmd_train_embedder, "train the toy neural embedder")
    p.add_argument("--manifest", required=True)
    p.add_argument("--kind", choices=kinds, default="mfbank16k")
    p.add_argument("--loss", choices=LOSSES, default="asoftmax")
    p.add_argument("--margin", type=int, default=4)
    p.add_argument("--pooling", choices=POOLINGS, default="mean_std")
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--embed-dim", dest="embed_dim", type=int, default=256)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=16)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = add("extract-embedding", cmd_extract_embedding, "extract toy embeddings of a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--kind", choices=kinds, default="mfbank16k")
    p.add_argument("--out", required=True)

    p = add("score", cmd_score, "score a trial list")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--trials", required=True)
    p.add_argument("--scoring", choices=("cosine", "plda"), default="cosine")
    p.add_argument("--train", help="training embeddings for whitening and PLDA")
    p.add_argument("--train-manifest", dest="train_manifest")
    p.add_argument("--plda-rank", dest="plda_rank", type=int, default=0)
    p.add_argument("--out", required=True)

    p = add("asnorm", cmd_asnorm, "adaptive symmetric score normalization")
    p.add_argument("--scores", required=True)
    p.add_argument("--cohort-scores", dest="cohort_scores", nargs="+", required=True)
    p.add_argument("--top-x", dest="top_x", type=int, default=10)
    p.add_argument("--out", required=True)

    p = add("calibrate", cmd_calibrate, "fit score calibrations")
    p.add_argument("--scores", nargs="+", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--prior", type=float, default=None)
    p.add_argument("--out", default="params.json")

    p = add("fuse", cmd_fuse, "equal-weight fusion of calibrated scores")
    p.add_argument("--scores", nargs="+", required=True)
    p.add_argument("--params", required=True)
    p.add_argument("--out", required=True)

    p = add("eval", cmd_eval, "minC, actC, EER and Cllr of score files")
    p.add_argument("--scores", nargs="+", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--p-target", dest="p_target", type=float, default=0.01)
    p.add_argument("--det", default=None)

    p = add("det", cmd_det, "DET plot of score files")
    p.add_argument("--scores", nargs="+", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--out", default="det.svg")
    p.add_argument("--table", default=None, help="directory of the DET tables")
    p.add_argument("--title", default="DET")

    p = add("simulate-rir", cmd_simulate_rir, "image source room impulse response")
    p.add_argument("--room", required=True)
    p.add_argument("--out", required=True)

    p = add("augment", cmd_augment, "reverberate and add noise")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--rir", default=None)
    p.add_argument("--noise", default=None)
    p.add_argument("--snr", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = add("run", cmd_run, "run an experiment")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--config")
    group.add_argument("--benchmark", metavar="DIRECTORY", help="generate and run the synthetic benchmark")
    p.add_argument("--preset", choices=("toy", "desk", "full"), default="toy")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--multiprocessing", action="store_true")

    p = add("init-config", cmd_init_config, "write the annotated reference configuration")
    p.add_argument("--out", default="experiment.json")

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point of ``fsv``; library errors become a message and exit
    status 1.

    """
    args = build_parser().parse_args(argv)

    try:
        args.func(args)
    except ConfigValidationError as e:
        message(["CONFIGURATION ERRORS"] + e.violations)
        return 1
    except StageError as e:
        message([f"STAGE '{e.stage}' FAILED", str(e.cause)] + ([f"UTTERANCE: {e.uid}"] if e.uid else []))
        return 1
    except FsvError as e:
        message(f"ERROR: {e}")
        return 1

    return 0


if __name__ == "__main__":
    sys.exit(main())

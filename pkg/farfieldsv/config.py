#!/usr/bin/env python3
"""
config.py

Experiment configuration: one JSON document with a section per stage,
presets, cross-stage validation and the annotated reference document.

"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

from farfieldsv.exceptions import ConfigError, ConfigValidationError, FormatError
from farfieldsv.featurematrix import KIND_DIMS
from farfieldsv.features import PRESETS
from farfieldsv.suite import Suite

message = Suite.message

SPLITS = ("train", "dev", "eval")
EXTRACTOR_TYPES = ("ivector", "toy")

PRESET_SIZES = {
    "toy": dict(components=8, rank=20, embed_dim=64, hidden=64, steps=600, lambda_decay=0.98, top_x=10),
    "desk": dict(components=64, rank=100, embed_dim=256, hidden=128, steps=1000, lambda_decay=0.99, top_x=10),
    "full": dict(
        components=2048, rank=600, embed_dim=256, hidden=512, steps=20000, lambda_decay=0.999, top_x=200
    ),
}

NOTES = {
    "name": "experiment name, used in report headers",
    "seed": "seed of every random stage; same seed gives byte-identical score files",
    "output": "output directory of scores, report and plots; the cache lives in <output>/cache "
    "unless FSV_CACHE_DIR is set",
    "cache": "reuse stage artifacts keyed by the content hash of stage settings and inputs",
    "multiprocessing": "run per-utterance work on a process pool",
    "ncores": "pool size, null for all cores",
    "manifests": "train/dev/eval manifests, lines 'utterance speaker wav-path'; the dev speakers "
    "are split into trial and adaptation halves",
    "resample": "resample stage to 8 kHz, required by mfbank8k extractors",
    "wpe": "dereverberation settings; 'variants' lists the runs without (false) and with (true) WPE",
    "extractors": "embedding extractors; type 'ivector' (UBM + total variability) or 'toy' "
    "(neural embedder with loss 'softmax' or 'asoftmax'; the A-softmax margin is phased in as "
    "lambda = max(lambda_min, lambda_max * lambda_decay^step))",
    "backends": "back-end chains: coral, whitening ('train', 'dev' or null), lnorm, "
    "scoring ('plda' or 'cosine')",
    "asnorm": "adaptive symmetric score normalization against the adaptation cohort",
    "calibration": "detection cost operating point, calibration prior and top_k back-ends per "
    "extractor entering the fusion",
    "det": "draw the dev and eval DET comparison plots",
}


def ivector_extractor(name: str = "ivector", preset: str = "toy", **overrides) -> dict:
    """
    Settings of an i-vector extractor.

    """
    sizes = PRESET_SIZES[preset]
    section = {
        "name": name,
        "type": "ivector",
        "features": "mfcc20",
        "components": sizes["components"],
        "rank": sizes["rank"],
        "ubm_iterations": 10,
        "tv_iterations": 5,
    }
    section.update(overrides)
    return section


def toy_extractor(name: str = "toy", preset: str = "toy", **overrides) -> dict:
    """
    Settings of a toy neural embedder.

    """
    sizes = PRESET_SIZES[preset]
    section = {
        "name": name,
        "type": "toy",
        "features": "mfbank16k",
        "hidden": sizes["hidden"],
        "embed_dim": sizes["embed_dim"],
        "pooling": "mean_std",
        "loss": "asoftmax",
        "margin": 4,
        "steps": sizes["steps"],
        "lambda_decay": sizes["lambda_decay"],
        "batch_size": 16,
        "learning_rate": 0.01,
    }
    section.update(overrides)
    return section


@dataclass
class ExperimentConfig:
    """
    Experiment document. Unknown keys starting with an underscore are
    ignored, e.g. ``_notes``.

    """

    name: str = "experiment"
    seed: int = 0
    output: str = "output"
    cache: bool = True
    multiprocessing: bool = False
    ncores: Optional[int] = None
    manifests: dict = field(default_factory=dict)
    resample: bool = False
    wpe: dict = field(
        default_factory=lambda: {"variants": [False, True], "taps": 10, "delay": 3, "iterations": 3}
    )
    extractors: list = field(default_factory=lambda: [ivector_extractor(), toy_extractor()])
    backends: list = field(
        default_factory=lambda: [
            {"coral": False, "whitening": "train", "lnorm": True, "scoring": "cosine"},
            {"coral": False, "whitening": "train", "lnorm": True, "scoring": "plda", "plda_rank": 10},
        ]
    )
    asnorm: dict = field(default_factory=lambda: {"enabled": True, "top_x": 10})
    calibration: dict = field(
        default_factory=lambda: {"p_target": 0.01, "c_miss": 1.0, "c_fa": 1.0, "top_k": 1}
    )
    det: bool = True

    @classmethod
    def preset(cls, size: str, **overrides) -> ExperimentConfig:
        """
        Configuration sized for the toy, desk or full preset, named after
        the preset unless ``name`` is among the overrides.

        """
        if size not in PRESET_SIZES:
            raise ConfigError(f"Unknown preset: {size}")
        config = cls(
            name=size,
            extractors=[
                ivector_extractor(preset=size),
                toy_extractor("toy-asoftmax", preset=size),
                toy_extractor("toy-softmax", preset=size, loss="softmax"),
            ],
            asnorm={"enabled": True, "top_x": PRESET_SIZES[size]["top_x"]},
        )
        for key, value in overrides.items():
            if key not in {f.name for f in fields(cls)}:
                raise ConfigError(f"Unknown configuration key: {key}")
            setattr(config, key, value)
        return config

    def to_dict(self) -> dict:
        return copy.deepcopy(asdict(self))

    @classmethod
    def from_dict(cls, document: dict) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(k for k in document if k not in known and not k.startswith("_"))
        if unknown:
            raise ConfigValidationError([f"unknown section '{k}'" for k in unknown])
        return cls(**{k: copy.deepcopy(v) for k, v in document.items() if k in known})

    def write(self, filename: str, notes: bool = False, verbose: bool = False) -> None:
        """
        Write the JSON document, optionally annotated with ``_notes``.

        """
        document = self.to_dict()
        if notes:
            document = {"_notes": NOTES, **document}
        with open(filename, "w") as f:
            json.dump(document, f, indent=2)
            f.write("\n")

        if verbose:
            message(f"WRITTEN: {filename}")

    @classmethod
    def read(cls, filename: str) -> ExperimentConfig:
        """
        Read a JSON experiment document.

        """
        try:
            with open(filename) as f:
                document = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"{filename}: {e}") from e
        if not isinstance(document, dict):
            raise FormatError(f"{filename}: expecting a JSON object")
        return cls.from_dict(document)


def _check_extractor(
    i: int, section: dict, resample: bool, names: set, violations: list[str]
) -> None:
    from farfieldsv.embedder import LOSSES, POOLINGS

    name = section.get("name", f"#{i}")
    where = f"extractor '{name}'"

    if name in names:
        violations.append(f"{where}: duplicate name")
    names.add(name)

    kind = section.get("features")
    if kind not in PRESETS:
        violations.append(f"{where}: unknown feature kind '{kind}'")
    elif kind == "mfbank8k" and not resample:
        violations.append(f"{where}: mfbank8k requires the resample stage")

    kind_type = section.get("type")
    if kind_type not in EXTRACTOR_TYPES:
        violations.append(f"{where}: unknown type '{kind_type}'")
        return

    if kind_type == "ivector":
        C, R = section.get("components", 0), section.get("rank", 0)
        if not (isinstance(C, int) and C >= 1):
            violations.append(f"{where}: components must be a positive integer")
        if not (isinstance(R, int) and R >= 1):
            violations.append(f"{where}: rank must be a positive integer")
        elif kind in KIND_DIMS and isinstance(C, int) and C >= 1 and R >= C * KIND_DIMS[kind]:
            violations.append(f"{where}: rank {R} must be below the supervector size {C * KIND_DIMS[kind]}")
        for key in ("ubm_iterations", "tv_iterations"):
            if section.get(key, 1) < 1:
                violations.append(f"{where}: {key} must be positive")
    else:
        if section.get("loss", "asoftmax") not in LOSSES:
            violations.append(f"{where}: unknown loss '{section.get('loss')}'")
        if section.get("pooling", "mean_std") not in POOLINGS:
            violations.append(f"{where}: unknown pooling '{section.get('pooling')}'")
        if section.get("margin", 4) not in (1, 2, 3, 4):
            violations.append(f"{where}: margin must be an integer in 1..4")
        lam_min, lam_max = section.get("lambda_min", 5.0), section.get("lambda_max", 1000.0)
        if not 0 <= lam_min <= lam_max:
            violations.append(f"{where}: expecting 0 <= lambda_min <= lambda_max, got {lam_min}, {lam_max}")
        if not 0 < section.get("lambda_decay", 0.99) <= 1:
            violations.append(f"{where}: lambda_decay must lie in (0, 1]")
        for key in ("hidden", "embed_dim", "steps", "batch_size"):
            value = section.get(key, 1)
            if not (isinstance(value, int) and value >= 1):
                violations.append(f"{where}: {key} must be a positive integer")
        if not section.get("learning_rate", 0.01) > 0:
            violations.append(f"{where}: learning_rate must be positive")


def validate_config(config: ExperimentConfig, check_paths: bool = True) -> ExperimentConfig:
    """
    Check every stage section and the cross-stage constraints.

    Parameters:
        config : ExperimentConfig
        check_paths : bool
            Also require the manifests to exist and be non-empty.

    Returns:
        The configuration, unchanged.

    Raises:
        ConfigValidationError listing every violation.

    """
    from farfieldsv.dereverb import WpeConfig
    from farfieldsv.metrics import DcfParams

    violations: list[str] = list()

    if not isinstance(config.seed, int):
        violations.append(f"seed must be an integer, got {config.seed!r}")
    if config.ncores is not None and not (isinstance(config.ncores, int) and config.ncores >= 1):
        violations.append(f"ncores must be a positive integer or null, got {config.ncores!r}")

    for split in SPLITS:
        filename = config.manifests.get(split)
        if not filename:
            violations.append(f"manifest '{split}' is missing")
        elif check_paths:
            if not os.path.isfile(filename):
                violations.append(f"manifest '{split}' not found: {filename}")
            else:
                from farfieldsv.corpus import count_entries

                if count_entries(filename) == 0:
                    violations.append(f"manifest '{split}' is empty: {filename}")
    for split in config.manifests:
        if split not in SPLITS:
            violations.append(f"unknown manifest '{split}'")

    variants = config.wpe.get("variants", [False])
    if not variants or any(v not in (True, False) for v in variants) or len(set(variants)) != len(variants):
        violations.append(f"wpe variants must be distinct booleans, got {variants!r}")
    try:
        WpeConfig(**{k: v for k, v in config.wpe.items() if k != "variants"})
    except (ConfigError, TypeError) as e:
        violations.append(f"wpe: {e}")

    if not config.extractors:
        violations.append("no extractor configured")
    names: set = set()
    for i, section in enumerate(config.extractors):
        _check_extractor(i, section, config.resample, names, violations)

    if not config.backends:
        violations.append("no back-end configured")
    from farfieldsv.backend import Backend

    accepted = set(Backend().get_params())
    for i, section in enumerate(config.backends):
        unknown = sorted(set(section) - accepted)
        if unknown:
            violations.append(f"back-end #{i}: unknown setting(s) {unknown}")
        if section.get("scoring") not in ("plda", "cosine"):
            violations.append(f"back-end #{i}: unknown scoring '{section.get('scoring')}'")
        if section.get("whitening") not in (None, "train", "dev"):
            violations.append(f"back-end #{i}: unknown whitening '{section.get('whitening')}'")

    if config.asnorm.get("enabled", False) and config.asnorm.get("top_x", 0) < 2:
        violations.append(f"asnorm: top_x must be at least 2, got {config.asnorm.get('top_x')}")

    try:
        DcfParams(
            p_target=config.calibration.get("p_target", 0.01),
            c_miss=config.calibration.get("c_miss", 1.0),
            c_fa=config.calibration.get("c_fa", 1.0),
        )
    except ConfigError as e:
        violations.append(f"calibration: {e}")
    if config.calibration.get("top_k", 1) < 1:
        violations.append("calibration: top_k must be positive")

    if violations:
        raise ConfigValidationError(violations)

    return config


def reference_config() -> ExperimentConfig:
    """
    Reference document written by ``fsv init-config``.

    """
    return ExperimentConfig.preset(
        "toy",
        name="reference",
        manifests={split: f"data/{split}/manifest.txt" for split in SPLITS},
    )

#!/usr/bin/env python3
"""
test_config.py

Test the config.py module.
"""

import json

import pytest

from farfieldsv import config as cfg
from farfieldsv.config import ExperimentConfig
from farfieldsv.exceptions import ConfigError, ConfigValidationError, FormatError


@pytest.fixture(scope="module")
def test_path(tmp_path_factory):
    return tmp_path_factory.mktemp("test_config")


def violations(config, check_paths=False):
    with pytest.raises(ConfigValidationError) as e:
        cfg.validate_config(config, check_paths=check_paths)
    return e.value.violations


class TestPresets:
    """
    Test the presets.

    """

    @pytest.mark.parametrize("name", ["toy", "desk", "full"])
    def test_preset(self, name):
        config = ExperimentConfig.preset(name, manifests={"train": "a", "dev": "b", "eval": "c"})
        assert [e["name"] for e in config.extractors] == ["ivector", "toy-asoftmax", "toy-softmax"]
        assert config.extractors[0]["components"] == cfg.PRESET_SIZES[name]["components"]
        assert config.asnorm["top_x"] == cfg.PRESET_SIZES[name]["top_x"]
        cfg.validate_config(config, check_paths=False)

    def test_unknown(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.preset("huge")
        with pytest.raises(ConfigError):
            ExperimentConfig.preset("toy", colour="blue")

    def test_named(self):
        assert ExperimentConfig.preset("desk").name == "desk"
        config = ExperimentConfig.preset("toy", name="benchmark", seed=7)
        assert (config.name, config.seed) == ("benchmark", 7)
        assert config.extractors[0]["components"] == cfg.PRESET_SIZES["toy"]["components"]

    def test_reference(self):
        config = cfg.reference_config()
        assert config.name == "reference"
        assert set(config.manifests) == set(cfg.SPLITS)
        cfg.validate_config(config, check_paths=False)


class TestValidation:
    """
    Test the cross-stage validation.

    """

    def test_collects_all(self):
        config = cfg.reference_config()
        config.manifests = {"train": "a"}
        config.asnorm = {"enabled": True, "top_x": 1}
        config.calibration = {"p_target": 1.5, "top_k": 0}
        found = violations(config)
        assert "manifest 'dev' is missing" in found
        assert "manifest 'eval' is missing" in found
        assert "asnorm: top_x must be at least 2, got 1" in found
        assert "calibration: top_k must be positive" in found
        assert any(v.startswith("calibration: Invalid target prior") for v in found)

    def test_resample(self):
        config = cfg.reference_config()
        config.extractors = [cfg.toy_extractor(features="mfbank8k")]
        assert violations(config) == ["extractor 'toy': mfbank8k requires the resample stage"]
        config.resample = True
        cfg.validate_config(config, check_paths=False)

    def test_rank(self):
        config = cfg.reference_config()
        config.extractors = [cfg.ivector_extractor(components=2, rank=120)]
        assert violations(config) == ["extractor 'ivector': rank 120 must be below the supervector size 120"]

    def test_extractors(self):
        config = cfg.reference_config()
        config.extractors = [
            cfg.toy_extractor(loss="triplet", margin=7),
            cfg.toy_extractor(features="spectrogram"),
            {"name": "x", "type": "xvector", "features": "mfcc20"},
        ]
        found = violations(config)
        assert "extractor 'toy': unknown loss 'triplet'" in found
        assert "extractor 'toy': margin must be an integer in 1..4" in found
        assert "extractor 'toy': duplicate name" in found
        assert "extractor 'toy': unknown feature kind 'spectrogram'" in found
        assert "extractor 'x': unknown type 'xvector'" in found

    def test_annealing(self):
        config = cfg.reference_config()
        config.extractors = [cfg.toy_extractor(lambda_min=50.0, lambda_max=10.0, lambda_decay=1.5)]
        assert violations(config) == [
            "extractor 'toy': expecting 0 <= lambda_min <= lambda_max, got 50.0, 10.0",
            "extractor 'toy': lambda_decay must lie in (0, 1]",
        ]
        config.extractors = [cfg.toy_extractor(preset="toy")]
        assert config.extractors[0]["lambda_decay"] == cfg.PRESET_SIZES["toy"]["lambda_decay"]
        cfg.validate_config(config, check_paths=False)

    def test_backends(self):
        config = cfg.reference_config()
        config.backends = [{"scoring": "svm", "whitening": "eval", "gamma": 1}]
        found = violations(config)
        assert "back-end #0: unknown setting(s) ['gamma']" in found
        assert "back-end #0: unknown scoring 'svm'" in found
        assert "back-end #0: unknown whitening 'eval'" in found

    def test_wpe(self):
        config = cfg.reference_config()
        config.wpe = {"variants": [True, True], "delay": 0}
        found = violations(config)
        assert found[0] == "wpe variants must be distinct booleans, got [True, True]"
        assert found[1].startswith("wpe: ")

    def test_paths(self, test_path):
        empty = f"{test_path}/empty.txt"
        open(empty, "w").close()
        config = cfg.reference_config()
        config.manifests = {"train": empty, "dev": f"{test_path}/missing.txt", "eval": empty, "test": empty}
        found = violations(config, check_paths=True)
        assert f"manifest 'train' is empty: {empty}" in found
        assert f"manifest 'dev' not found: {test_path}/missing.txt" in found
        assert "unknown manifest 'test'" in found


class TestDocument:
    """
    Test the JSON document.

    """

    def test_write_read(self, test_path):
        filename = f"{test_path}/experiment.json"
        config = cfg.reference_config()
        config.write(filename, notes=True)
        with open(filename) as f:
            document = json.load(f)
        assert document["_notes"] == cfg.NOTES
        assert ExperimentConfig.read(filename).to_dict() == config.to_dict()

    def test_unknown_section(self, test_path):
        filename = f"{test_path}/unknown.json"
        with open(filename, "w") as f:
            json.dump({"name": "x", "plotting": {}}, f)
        with pytest.raises(ConfigValidationError) as e:
            ExperimentConfig.read(filename)
        assert e.value.violations == ["unknown section 'plotting'"]

    def test_garbage(self, test_path):
        filename = f"{test_path}/garbage.json"
        with open(filename, "w") as f:
            f.write("[1, 2]")
        with pytest.raises(FormatError):
            ExperimentConfig.read(filename)
        with open(filename, "w") as f:
            f.write("{")
        with pytest.raises(FormatError):
            ExperimentConfig.read(filename)

    def test_copy(self):
        config = cfg.reference_config()
        document = config.to_dict()
        document["extractors"][0]["rank"] = 1
        assert config.extractors[0]["rank"] != 1

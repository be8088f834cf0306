#!/usr/bin/env python3
"""
test_featurematrix.py

Test the featurematrix.py module.
"""

import struct

import matplotlib.pyplot as plt
import numpy as np
import pytest

from farfieldsv.exceptions import ConfigError, DimensionError, FormatError, NonFiniteError
from farfieldsv.featurematrix import KIND_CODES, MAGIC, FeatureMatrix


@pytest.fixture(scope="module")
def test_features():
    frames = np.random.default_rng(0).normal(size=(50, 60))
    return FeatureMatrix(frames=frames, feature_kind="mfcc20", uid="utt")


@pytest.fixture(scope="module")
def test_path(tmp_path_factory):
    return tmp_path_factory.mktemp("test_featurematrix")


class TestFeatureMatrix:
    """
    Test FeatureMatrix class.

    """

    def test_instance(self):
        assert isinstance(FeatureMatrix(), FeatureMatrix)

    def test_shape(self, test_features):
        assert len(test_features) == 50
        assert test_features.dim == 60

    def test_kind(self):
        with pytest.raises(ConfigError):
            FeatureMatrix(frames=np.zeros((2, 3)), feature_kind="spectrogram")

    def test_dimension(self):
        with pytest.raises(DimensionError):
            FeatureMatrix(frames=np.zeros((2, 20)), feature_kind="mfcc20")

    def test_raw_any_dimension(self):
        assert FeatureMatrix(frames=np.zeros((2, 7))).dim == 7

    def test_non_finite(self):
        frames = np.zeros((2, 64))
        frames[1, 3] = np.inf
        with pytest.raises(NonFiniteError):
            FeatureMatrix(frames=frames, feature_kind="gfbank")

    def test_header(self, test_features, test_path):
        filename = f"{test_path}/header.fsv"
        test_features.write(filename)
        with open(filename, "rb") as f:
            blob = f.read()
        assert blob[:4] == MAGIC
        assert struct.unpack("<IIB", blob[4:13]) == (50, 60, KIND_CODES["mfcc20"])
        assert len(blob) == 13 + 50 * 60 * 4

    def test_write_read(self, test_features, test_path):
        filename = f"{test_path}/features.fsv"
        test_features.write(filename)
        features = FeatureMatrix.read(filename, uid="utt")
        assert features.feature_kind == "mfcc20"
        np.testing.assert_allclose(features.frames, test_features.frames, rtol=1e-6, atol=1e-6)

    def test_bad_magic(self, test_path):
        filename = f"{test_path}/bad.fsv"
        with open(filename, "wb") as f:
            f.write(b"FSV2" + struct.pack("<IIB", 1, 1, 255) + b"\x00" * 4)
        with pytest.raises(FormatError):
            FeatureMatrix.read(filename)

    def test_truncated(self, test_path):
        filename = f"{test_path}/truncated.fsv"
        with open(filename, "wb") as f:
            f.write(MAGIC + struct.pack("<IIB", 4, 4, 255) + b"\x00" * 12)
        with pytest.raises(FormatError):
            FeatureMatrix.read(filename)

    def test_unknown_code(self, test_path):
        filename = f"{test_path}/code.fsv"
        with open(filename, "wb") as f:
            f.write(MAGIC + struct.pack("<IIB", 1, 1, 77) + b"\x00" * 4)
        with pytest.raises(FormatError):
            FeatureMatrix.read(filename)

    def test_plot(self, monkeypatch, test_features):
        monkeypatch.setattr(plt, "show", lambda: None)
        test_features.plot(show=True)
        plt.close("all")

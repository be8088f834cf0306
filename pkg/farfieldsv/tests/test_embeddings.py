#!/usr/bin/env python3
"""
test_embeddings.py

Test the embeddings.py module.
"""

import matplotlib.pyplot as plt
import numpy as np
import pytest

from farfieldsv.embeddings import Embedding, Embeddings
from farfieldsv.exceptions import DimensionError, FormatError


@pytest.fixture(scope="module")
def test_embeddings():
    rng = np.random.default_rng(0)
    vectors = [
        Embedding(vector=rng.normal(size=8), extractor="ivector", dereverb=True, uid=f"u{i}") for i in range(6)
    ]
    speakers = {f"u{i}": f"s{i % 2}" for i in range(6)}
    return Embeddings.from_list(vectors, speakers=speakers)


@pytest.fixture(scope="module")
def test_path(tmp_path_factory):
    return tmp_path_factory.mktemp("test_embeddings")


class TestEmbeddings:
    """
    Test Embeddings class.

    """

    def test_instance(self):
        embeddings = Embeddings()
        assert embeddings.dim == 0
        assert embeddings.matrix().shape == (0, 0)

    def test_from_list(self, test_embeddings):
        assert len(test_embeddings) == 6
        assert test_embeddings.dim == 8
        assert test_embeddings.model == {"extractor": "ivector", "dereverb": True}
        assert test_embeddings.labels(["u0", "u3"]) == ["s0", "s1"]

    def test_embedding(self, test_embeddings):
        e = test_embeddings.embedding("u2")
        assert e.uid == "u2"
        assert e.dereverb
        assert len(e) == 8

    def test_dimension(self):
        with pytest.raises(DimensionError):
            Embeddings(data={"a": np.zeros(3), "b": np.zeros(4)})

    def test_subset(self, test_embeddings):
        subset = test_embeddings.subset(["u4", "u1"])
        assert subset.uids == ["u4", "u1"]
        np.testing.assert_array_equal(subset.matrix()[0], test_embeddings["u4"])
        assert subset.speakers == {"u4": "s0", "u1": "s1"}

    def test_transform(self, test_embeddings):
        doubled = test_embeddings.transform(lambda X: 2 * X)
        np.testing.assert_allclose(doubled.matrix(), 2 * test_embeddings.matrix())
        assert doubled.speakers == test_embeddings.speakers

    def test_write_read(self, test_embeddings, test_path):
        filename = f"{test_path}/vectors.fsve"
        test_embeddings.write(filename)
        embeddings = Embeddings.read(filename, speakers=test_embeddings.speakers)
        assert embeddings.uids == test_embeddings.uids
        assert embeddings.model == test_embeddings.model
        np.testing.assert_allclose(embeddings.matrix(), test_embeddings.matrix(), rtol=1e-6)

    def test_truncated(self, test_embeddings, test_path):
        filename = f"{test_path}/truncated.fsve"
        test_embeddings.write(filename)
        with open(filename, "rb") as f:
            blob = f.read()
        with open(filename, "wb") as f:
            f.write(blob[:-4])
        with pytest.raises(FormatError):
            Embeddings.read(filename)

    def test_magic(self, test_path):
        filename = f"{test_path}/magic.fsve"
        with open(filename, "wb") as f:
            f.write(b"FSVM")
        with pytest.raises(FormatError):
            Embeddings.read(filename)

    def test_plot(self, monkeypatch, test_embeddings):
        monkeypatch.setattr(plt, "show", lambda: None)
        test_embeddings.plot(show=True)
        plt.close("all")

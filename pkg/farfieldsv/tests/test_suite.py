#!/usr/bin/env python3
"""
test_suite.py

Test the suite.py module.
"""

import hashlib
import os

import numpy as np
import pytest

import farfieldsv
from farfieldsv.suite import Suite, default_rng


class TestSuite:
    """
    Test Suite class.

    """

    def test_intro(self, capsys):
        Suite.intro()
        captured = capsys.readouterr()
        assert farfieldsv.__version__ in captured.out

    def test_message_list(self, capsys):
        Suite.message(["one", "two"], space=10)
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == 12 * "="
        assert lines[1].strip() == "one"
        assert lines[2].strip() == "two"

    def test_cachedir_environment(self, monkeypatch, tmp_path):
        monkeypatch.setenv("FSV_CACHE_DIR", str(tmp_path / "env"))
        assert Suite.cachedir(str(tmp_path / "out")) == str(tmp_path / "env")
        assert os.path.isdir(tmp_path / "env")

    def test_cachedir_output(self, monkeypatch, tmp_path):
        monkeypatch.delenv("FSV_CACHE_DIR", raising=False)
        assert Suite.cachedir(str(tmp_path)) == os.path.join(str(tmp_path), "cache")

    def test_contenthash(self):
        a = np.arange(4.0)
        assert Suite.contenthash({"x": 1, "y": 2}, a) == Suite.contenthash({"y": 2, "x": 1}, a.copy())
        assert Suite.contenthash(a) != Suite.contenthash(a.astype(np.float32))
        assert Suite.contenthash("ab", "c") != Suite.contenthash("a", "bc")

    def test_filehash(self, tmp_path):
        path = tmp_path / "blob.bin"
        path.write_bytes(b"farfield")
        assert Suite.filehash(str(path)) == hashlib.md5(b"farfield").hexdigest()
        other = tmp_path / "other.bin"
        other.write_bytes(b"farfield")
        assert Suite.filehash(str(path)) == Suite.filehash(str(other))

    def test_cached(self, tmp_path):
        calls = list()

        def compute():
            calls.append(1)
            return {"value": 42}

        first = Suite.cached(str(tmp_path), "abc", "stage", compute)
        second = Suite.cached(str(tmp_path), "abc", "stage", compute)
        assert first == second == {"value": 42}
        assert len(calls) == 1

        Suite.cached(str(tmp_path), "abc", "stage", compute, cache=False)
        assert len(calls) == 2

    def test_header(self):
        hdr = Suite.header("ScoreSet", system="ivector", trials=12)
        assert any(line.startswith("TYPE") and "SCORESET" in line for line in hdr)
        assert "TRIALS   = 12" in hdr
        assert "SYSTEM   = 'ivector'" in hdr


class TestDefaultRng:
    """
    Test the seeded generators.

    """

    def test_reproducible(self):
        np.testing.assert_array_equal(default_rng(3).normal(size=5), default_rng(3).normal(size=5))

    def test_offset(self):
        assert not np.array_equal(default_rng(3, 1).normal(size=5), default_rng(3).normal(size=5))
        np.testing.assert_array_equal(default_rng(3, 1).normal(size=5), default_rng(4).normal(size=5))

    @pytest.mark.parametrize("offset", [0, 5])
    def test_unseeded(self, offset):
        assert isinstance(default_rng(None, offset), np.random.Generator)

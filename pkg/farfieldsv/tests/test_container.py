#!/usr/bin/env python3
"""
test_container.py

Test the container.py module.
"""

import numpy as np
import pytest

from farfieldsv import container
from farfieldsv.exceptions import FormatError


@pytest.fixture(scope="module")
def test_path(tmp_path_factory):
    return tmp_path_factory.mktemp("test_container")


@pytest.fixture(scope="module")
def test_sections():
    return {
        "ubm": {
            "weights": np.array([0.25, 0.75]),
            "means": np.arange(6.0).reshape(2, 3),
            "count": np.array(7),
        },
        "meta": {
            "name": container.text_array("ivector-ü"),
            "flags": np.array([1, 0, 1], dtype=np.uint8),
            "filters": np.array([1 + 2j, 3 - 1j]),
            "small": np.array([0.5], dtype=np.float32),
        },
    }


class TestContainer:
    """
    Test the FSVM container.

    """

    def test_write_read(self, test_sections, test_path):
        filename = f"{test_path}/model.fsvm"
        container.write_container(filename, test_sections, {"ubm": "1.0", "meta": "2.1"})
        sections = container.read_container(filename, supported={"ubm": "1.3"})
        assert list(sections) == ["ubm", "meta"]
        np.testing.assert_array_equal(sections["ubm"]["means"], test_sections["ubm"]["means"])
        assert sections["ubm"]["count"].shape == ()
        assert int(sections["ubm"]["count"]) == 7
        assert container.array_text(sections["meta"]["name"]) == "ivector-ü"
        np.testing.assert_array_equal(sections["meta"]["filters"], [1 + 2j, 3 - 1j])
        assert sections["meta"]["small"].dtype == np.float32

    def test_major_version(self, test_sections, test_path):
        filename = f"{test_path}/version.fsvm"
        container.write_container(filename, test_sections, {"ubm": "2.0", "meta": "1.0"})
        with pytest.raises(FormatError):
            container.read_container(filename, supported={"ubm": "1.0"})

    def test_missing_section(self, test_sections, test_path):
        filename = f"{test_path}/missing.fsvm"
        container.write_container(filename, {"ubm": test_sections["ubm"]}, {"ubm": "1.0"})
        with pytest.raises(FormatError):
            container.read_container(filename, supported={"ubm": "1.0", "tv": "1.0"})

    def test_magic(self, test_path):
        filename = f"{test_path}/bad.fsvm"
        with open(filename, "wb") as f:
            f.write(b"FSVX\x00\x00")
        with pytest.raises(FormatError):
            container.read_container(filename)

    def test_unsupported_dtype(self, test_path):
        with pytest.raises(FormatError):
            container.write_container(
                f"{test_path}/object.fsvm", {"s": {"x": np.array(["a"], dtype=object)}}, {"s": "1.0"}
            )

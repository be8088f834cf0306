#!/usr/bin/env python3
"""
test_data.py

Test the data.py module.
"""

import pytest

from farfieldsv.data import Data


@pytest.fixture
def test_data():
    return Data(data={"a": 1, "b": 2, "c": 3}, model={"kind": "test"})


class TestData:
    """
    Test Data class.

    """

    def test_instance(self):
        assert isinstance(Data(), Data)

    def test_uids(self, test_data):
        assert test_data.uids == ["a", "b", "c"]
        assert len(test_data) == 3
        assert "b" in test_data
        assert test_data["c"] == 3

    def test_from_dict(self, test_data):
        copy = Data(test_data.get())
        assert copy.uids == test_data.uids
        assert copy.model == {"kind": "test"}

    def test_missing(self):
        with pytest.raises(KeyError):
            Data(data={"a": 1}, uids=["a", "z"])

    def test_str(self, test_data):
        assert str(test_data).startswith("farfieldsv Data instance.")
        assert "3 uids" in repr(test_data)

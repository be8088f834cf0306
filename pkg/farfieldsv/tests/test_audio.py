#!/usr/bin/env python3
"""
test_audio.py

Test the audio.py module.
"""

import matplotlib.pyplot as plt
import numpy as np
import pytest

from farfieldsv.audio import AudioBuffer
from farfieldsv.exceptions import ConfigError, FormatError, NonFiniteError


@pytest.fixture(scope="module")
def test_audio():
    t = np.arange(16000) / 16000
    return AudioBuffer(samples=0.5 * np.sin(2 * np.pi * 440 * t), sample_rate=16000, uid="tone")


@pytest.fixture(scope="module")
def test_path(tmp_path_factory):
    return tmp_path_factory.mktemp("test_audio")


class TestAudioBuffer:
    """
    Test AudioBuffer class.

    """

    def test_instance(self):
        assert isinstance(AudioBuffer(), AudioBuffer)

    def test_duration(self, test_audio):
        assert len(test_audio) == 16000
        assert test_audio.duration() == 1.0
        assert test_audio.power() == pytest.approx(0.125, rel=1e-3)

    def test_empty_power(self):
        assert AudioBuffer().power() == 0.0

    def test_stereo(self):
        with pytest.raises(ConfigError):
            AudioBuffer(samples=np.zeros((10, 2)))

    def test_rate(self):
        with pytest.raises(ConfigError):
            AudioBuffer(samples=np.zeros(10), sample_rate=0)

    def test_non_finite(self):
        with pytest.raises(NonFiniteError):
            AudioBuffer(samples=np.array([0.0, np.nan]))

    def test_copy(self, test_audio):
        copy = test_audio.copy(samples=np.zeros(4))
        assert copy.sample_rate == 16000
        assert copy.uid == "tone"
        assert len(copy) == 4
        assert len(test_audio) == 16000

    def test_get(self, test_audio):
        copy = AudioBuffer(test_audio.get())
        np.testing.assert_array_equal(copy.samples, test_audio.samples)

    def test_write_read(self, test_audio, test_path):
        filename = f"{test_path}/tone.wav"
        test_audio.write(filename)
        audio = AudioBuffer.read(filename, uid="tone")
        assert audio.sample_rate == 16000
        assert audio.uid == "tone"
        np.testing.assert_allclose(audio.samples, test_audio.samples, atol=2.0**-14)

    def test_write_clips(self, test_path):
        filename = f"{test_path}/loud.wav"
        AudioBuffer(samples=np.array([2.0, -2.0, 0.0])).write(filename)
        audio = AudioBuffer.read(filename)
        assert audio.samples.max() < 1.0
        assert audio.samples.min() == -1.0

    def test_read_garbage(self, test_path):
        filename = f"{test_path}/garbage.wav"
        with open(filename, "wb") as f:
            f.write(b"not a wav file at all")
        with pytest.raises(FormatError):
            AudioBuffer.read(filename)

    def test_plot(self, monkeypatch, test_audio):
        monkeypatch.setattr(plt, "show", lambda: None)
        test_audio.plot(show=True)
        plt.close("all")

#!/usr/bin/env python3
"""
test_metrics.py

Test the metrics.py module.
"""

from os.path import exists

import matplotlib.pyplot as plt
import numpy as np
import pytest
from astropy.io import ascii

from farfieldsv import metrics
from farfieldsv.exceptions import ConfigError, MissingClassError
from farfieldsv.metrics import DcfParams
from farfieldsv.trials import LabeledScoreSet


@pytest.fixture(scope="module")
def test_scores():
    targets = [0.2, 0.6, 0.7, 0.9]
    impostors = [0.1, 0.3, 0.4, 0.8]
    return LabeledScoreSet(
        scores=targets + impostors, labels=[True] * 4 + [False] * 4, system="hand"
    )


@pytest.fixture(scope="module")
def test_gaussian():
    rng = np.random.default_rng(0)
    return LabeledScoreSet(
        scores=np.concatenate([rng.normal(2.0, 1.0, 2000), rng.normal(0.0, 1.0, 20000)]),
        labels=np.concatenate([np.ones(2000, bool), np.zeros(20000, bool)]),
        system="gaussian",
    )


@pytest.fixture(scope="module")
def test_path(tmp_path_factory):
    return tmp_path_factory.mktemp("test_metrics")


class TestDcfParams:
    """
    Test DcfParams class.

    """

    def test_defaults(self):
        params = DcfParams()
        assert params.effective_prior == pytest.approx(0.01)
        assert params.threshold == pytest.approx(np.log(99.0))

    def test_effective_prior(self):
        params = DcfParams(p_target=0.01, c_miss=10.0, c_fa=1.0)
        assert params.effective_prior == pytest.approx(0.1 / 1.09)

    @pytest.mark.parametrize("keywords", [{"p_target": 0.0}, {"p_target": 1.0}, {"c_fa": 0.0}])
    def test_invalid(self, keywords):
        with pytest.raises(ConfigError):
            DcfParams(**keywords)

    def test_trivial_cost(self):
        params = DcfParams(p_target=0.01)
        assert params.normalized_cost(1.0, 0.0) == pytest.approx(1.0)
        assert params.normalized_cost(0.0, 1.0) == pytest.approx(99.0)


class TestRates:
    """
    Test error rates, EER and DCF.

    """

    def test_error_rates(self, test_scores):
        p_miss, p_fa = metrics.error_rates(test_scores, np.array([-np.inf, 0.6, np.inf]))
        np.testing.assert_allclose(p_miss, [0.0, 0.25, 1.0])
        np.testing.assert_allclose(p_fa, [1.0, 0.25, 0.0])

    def test_thresholds(self, test_scores):
        t = metrics.thresholds(test_scores)
        assert t[0] == -np.inf
        assert t[-1] == np.inf
        assert len(t) == 10

    def test_eer(self, test_scores):
        assert metrics.eer(test_scores) == pytest.approx(0.25)

    def test_eer_separable(self):
        scores = LabeledScoreSet(scores=[1.0, 2.0, -1.0, -2.0], labels=[True, True, False, False])
        assert metrics.eer(scores) == 0.0
        assert metrics.min_dcf(scores)[0] == 0.0

    def test_eer_inverted(self):
        scores = LabeledScoreSet(scores=[-1.0, -2.0, 1.0, 2.0], labels=[True, True, False, False])
        assert metrics.eer(scores) == pytest.approx(0.5)

    def test_eer_gaussian(self, test_gaussian):
        from scipy.stats import norm

        assert metrics.eer(test_gaussian) == pytest.approx(norm.cdf(-1.0), abs=0.01)

    def test_monotone_invariance(self, test_gaussian):
        warped = test_gaussian.transformed(np.exp(test_gaussian.scores))
        assert metrics.eer(warped) == pytest.approx(metrics.eer(test_gaussian))
        assert metrics.min_dcf(warped)[0] == pytest.approx(metrics.min_dcf(test_gaussian)[0])

    def test_min_dcf(self, test_scores):
        cost, threshold = metrics.min_dcf(test_scores, DcfParams(p_target=0.5))
        assert cost == pytest.approx(0.5)
        assert threshold == pytest.approx(0.6)

    def test_min_dcf_bounded(self, test_gaussian):
        cost, _ = metrics.min_dcf(test_gaussian)
        assert 0.0 < cost <= 1.0

    def test_act_dcf(self, test_scores):
        assert metrics.act_dcf(test_scores, DcfParams(p_target=0.5)) == pytest.approx(1.0)

    def test_act_at_least_min(self, test_gaussian):
        assert metrics.act_dcf(test_gaussian) >= metrics.min_dcf(test_gaussian)[0]

    def test_missing_class(self):
        with pytest.raises(MissingClassError):
            metrics.eer(LabeledScoreSet(scores=[1.0, 2.0], labels=[True, True]))


class TestDetCurve:
    """
    Test DetCurve class.

    """

    def test_points(self, test_scores):
        curve = metrics.det_points(test_scores)
        assert np.all(np.diff(curve.p_fa) <= 0)
        assert np.all(np.diff(curve.p_miss) >= 0)
        assert curve.eer() == pytest.approx(0.25)
        assert curve.system == "hand"

    def test_probit(self, test_scores):
        x, y = metrics.det_points(test_scores).probit()
        assert np.all(np.isfinite(x))
        assert np.all(np.isfinite(y))

    def test_write(self, test_scores, test_path):
        filename = f"{test_path}/det.tbl"
        metrics.det_points(test_scores).write(filename)
        assert exists(filename)
        tbl = ascii.read(filename, format="ipac")
        assert list(tbl.colnames) == ["threshold", "p_fa", "p_miss", "probit_p_fa", "probit_p_miss"]

    def test_plot_save(self, test_scores, test_gaussian, test_path):
        filename = f"{test_path}/det.svg"
        metrics.plot_det([metrics.det_points(test_scores), metrics.det_points(test_gaussian)], save=filename)
        assert exists(filename)

    def test_plot_show(self, monkeypatch, test_scores):
        monkeypatch.setattr(plt, "show", lambda: None)
        metrics.det_points(test_scores).plot(show=True)
        plt.close("all")

#!/usr/bin/env python3
"""
metrics.py

Detection metrics of labelled trial scores: equal error rate, minimum and
actual normalized detection cost, and DET curves.

A trial is accepted iff its score is at least the threshold. Thresholds
run over the distinct scores plus ±∞.

"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm  # type: ignore

from farfieldsv.exceptions import ConfigError
from farfieldsv.suite import Suite
from farfieldsv.trials import LabeledScoreSet

message = Suite.message

PROBIT_CLIP = 1e-5


@dataclass(frozen=True)
class DcfParams:
    """
    Detection cost operating point.

    """

    p_target: float = 0.01
    c_miss: float = 1.0
    c_fa: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.p_target < 1.0:
            raise ConfigError(f"Invalid target prior: {self.p_target}")
        if not (self.c_miss > 0 and self.c_fa > 0):
            raise ConfigError(f"Invalid costs: {self.c_miss}, {self.c_fa}")

    @property
    def effective_prior(self) -> float:
        """
        Target prior of the equivalent unit-cost operating point.

        """
        p = self.p_target * self.c_miss
        return p / (p + (1.0 - self.p_target) * self.c_fa)

    @property
    def threshold(self) -> float:
        """
        Bayes decision threshold for log-likelihood-ratio scores.

        """
        return float(np.log((1.0 - self.p_target) * self.c_fa / (self.p_target * self.c_miss)))

    def normalized_cost(self, p_miss, p_fa):
        p, cm, cf = self.p_target, self.c_miss, self.c_fa
        return (p * cm * np.asarray(p_miss) + (1.0 - p) * cf * np.asarray(p_fa)) / min(
            p * cm, (1.0 - p) * cf
        )


def error_rates(scores: LabeledScoreSet, thresholds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Miss and false-alarm rates at the given thresholds.

    """
    scores.check()
    tgt = np.sort(scores.targets())
    imp = np.sort(scores.impostors())
    thresholds = np.asarray(thresholds, dtype=float)
    p_miss = np.searchsorted(tgt, thresholds, side="left") / len(tgt)
    p_fa = (len(imp) - np.searchsorted(imp, thresholds, side="left")) / len(imp)
    return p_miss, p_fa


def thresholds(scores: LabeledScoreSet) -> np.ndarray:
    """
    Distinct scores plus ±∞, ascending.

    """
    return np.concatenate([[-np.inf], np.unique(scores.scores), [np.inf]])


def _lower_hull(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # Monotone chain over points sorted by x, then y.
    order = np.lexsort((y, x))
    hull: list[int] = list()
    for i in order:
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a])
            if cross > 0:
                break
            hull.pop()
        hull.append(i)
    return np.array(hull)


def eer_from_points(p_fa: np.ndarray, p_miss: np.ndarray) -> float:
    """
    Equal error rate on the ROC convex hull of the operating points:
    max over λ in [0, 1] of min_i [(1 − λ) P_fa,i + λ P_miss,i].

    """
    x = np.asarray(p_fa, dtype=float)
    y = np.asarray(p_miss, dtype=float)
    hull = _lower_hull(x, y)
    hx, hy = x[hull], y[hull]

    lambdas = [0.0, 1.0]
    for i in range(len(hull) - 1):
        dx, dy = hx[i + 1] - hx[i], hy[i] - hy[i + 1]
        if dx + dy > 0:
            lambdas.append(dx / (dx + dy))

    lam = np.clip(np.array(lambdas), 0.0, 1.0)
    values = np.min((1.0 - lam[:, None]) * hx[None, :] + lam[:, None] * hy[None, :], axis=1)

    return float(values.max())


def eer(scores: LabeledScoreSet) -> float:
    """
    Equal error rate in [0, 1].

    """
    p_miss, p_fa = error_rates(scores, thresholds(scores))
    return eer_from_points(p_fa, p_miss)


def min_dcf(scores: LabeledScoreSet, params: Optional[DcfParams] = None) -> tuple[float, float]:
    """
    Minimum normalized detection cost over all thresholds.

    Returns:
        The cost and the (first) threshold attaining it.

    """
    params = params or DcfParams()
    t = thresholds(scores)
    p_miss, p_fa = error_rates(scores, t)
    cost = params.normalized_cost(p_miss, p_fa)
    i = int(np.argmin(cost))
    return float(cost[i]), float(t[i])


def act_dcf(scores: LabeledScoreSet, params: Optional[DcfParams] = None) -> float:
    """
    Normalized detection cost at the Bayes threshold of LLR scores.

    """
    params = params or DcfParams()
    p_miss, p_fa = error_rates(scores, np.array([params.threshold]))
    return float(params.normalized_cost(p_miss, p_fa)[0])


class DetCurve:
    """
    farfieldsv DET curve class.
    Operating points (P_fa, P_miss) over the threshold sweep of one system.

    """

    def __init__(self, d: Optional[dict] = None, **keywords) -> None:
        """
        Initialize DetCurve class.

        """
        self.__set(d, **keywords)

    def set(self, d: Optional[dict] = None, **keywords) -> None:
        """
        Populate data dictionary.

        """
        self.__set(d, **keywords)

    def __set(self, d: Optional[dict] = None, **keywords) -> None:
        """
        Populate data dictionary helper.

        """
        self.thresholds = np.asarray(keywords.get("thresholds", list()), dtype=float)
        self.p_fa = np.asarray(keywords.get("p_fa", list()), dtype=float)
        self.p_miss = np.asarray(keywords.get("p_miss", list()), dtype=float)
        self.system = keywords.get("system", "")

        if isinstance(d, dict):
            if d.get("type", "") == self.__class__.__name__:
                for key in ("thresholds", "p_fa", "p_miss"):
                    if key not in keywords:
                        setattr(self, key, np.asarray(d[key], dtype=float))
                if "system" not in keywords:
                    self.system = d["system"]

    def get(self) -> dict:
        """
        Return data dictionary with expected keywords.

        """
        return {
            "type": self.__class__.__name__,
            "thresholds": self.thresholds,
            "p_fa": self.p_fa,
            "p_miss": self.p_miss,
            "system": self.system,
        }

    def __repr__(self) -> str:
        """
        Class representation.

        """
        return f"{self.__class__.__name__}({self.system=},{len(self.thresholds)} points)"

    def __str__(self) -> str:
        """
        A description of the instance.
        """

        return f"farfieldsv DetCurve instance.\n{self.system}: EER {100 * self.eer():.2f}%"

    def eer(self) -> float:
        return eer_from_points(self.p_fa, self.p_miss)

    def probit(self) -> tuple[np.ndarray, np.ndarray]:
        """
        Probit-scaled (P_fa, P_miss), clipped away from 0 and 1.

        """
        return (
            norm.ppf(np.clip(self.p_fa, PROBIT_CLIP, 1.0 - PROBIT_CLIP)),
            norm.ppf(np.clip(self.p_miss, PROBIT_CLIP, 1.0 - PROBIT_CLIP)),
        )

    def write(self, filename: str = "") -> None:
        """
        Write the curve as an IPAC-table.

        """
        from astropy.io import ascii  # type: ignore
        from astropy.table import Table  # type: ignore

        if filename == "":
            filename = self.__class__.__name__ + ".tbl"

        x, y = self.probit()

        tbl = Table(
            [self.thresholds, self.p_fa, self.p_miss, x, y],
            names=["threshold", "p_fa", "p_miss", "probit_p_fa", "probit_p_miss"],
            meta={"comments": Suite.header(self.__class__.__name__, system=self.system)},
        )

        ascii.write(tbl, filename, format="ipac", overwrite=True)

        message(f"WRITTEN: {filename}")

    def plot(self, **keywords) -> None:
        """
        Plot the curve on probit axes.

        """
        plot_det([self], **keywords)


def det_points(scores: LabeledScoreSet) -> DetCurve:
    """
    DET operating points over the ascending threshold sweep: P_fa
    non-increasing, P_miss non-decreasing.

    """
    t = thresholds(scores)
    p_miss, p_fa = error_rates(scores, t)
    return DetCurve(thresholds=t, p_fa=p_fa, p_miss=p_miss, system=scores.system)


def plot_det(curves: Sequence[DetCurve], **keywords) -> None:
    """
    Overlay DET curves on probit-scaled axes.

    Parameters:
        curves : sequence of DetCurve
        save : str
            Output filename; the extension selects the format, e.g. SVG.
        show : bool

    """
    import matplotlib.pyplot as plt  # type: ignore

    ticks = np.array([0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.4])

    _, ax = plt.subplots(figsize=keywords.get("figsize", (6, 6)))

    for curve in curves:
        x, y = curve.probit()
        ax.plot(x, y, label=f"{curve.system} ({100 * curve.eer():.2f}%)")

    lim = norm.ppf([0.0005, 0.5])
    ax.set_xlim(lim)
    ax.set_ylim(lim)
    ax.set_xticks(norm.ppf(ticks))
    ax.set_xticklabels([f"{100 * t:g}" for t in ticks])
    ax.set_yticks(norm.ppf(ticks))
    ax.set_yticklabels([f"{100 * t:g}" for t in ticks])
    ax.plot(lim, lim, color="grey", linestyle=":", linewidth=0.8)
    ax.set_xlabel("false alarm probability [%]")
    ax.set_ylabel("miss probability [%]")
    ax.set_title(keywords.get("title", "DET"))
    ax.grid(True, linestyle=":", linewidth=0.5)
    ax.legend(fontsize="small", loc="upper right")

    if keywords.get("save"):
        plt.savefig(keywords["save"])
        plt.close()
        message(f"WRITTEN: {keywords['save']}")
    elif keywords.get("show", False):
        plt.show()

#!/usr/bin/env python3
"""
calibration.py

Scale-and-bias calibration of subsystem scores to log-likelihood ratios
by prior-weighted logistic regression, equal-weight fusion and the Cllr
metric.

"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import expit, logit  # type: ignore
from sklearn.base import BaseEstimator, TransformerMixin  # type: ignore
from sklearn.exceptions import NotFittedError  # type: ignore

from farfieldsv.exceptions import ConfigError, DimensionError, FormatError
from farfieldsv.metrics import DcfParams, min_dcf
from farfieldsv.suite import Suite
from farfieldsv.trials import LabeledScoreSet, ScoreSet

message = Suite.message

A_MIN = 1e-6
A_MAX = 1e3
GRADIENT_TOLERANCE = 1e-8
MAX_ITERATIONS = 100


def cllr(scores: LabeledScoreSet) -> float:
    """
    Cost of log-likelihood ratio in bits.

    """
    scores.check()
    tgt = np.mean(np.logaddexp(0.0, -scores.targets()))
    imp = np.mean(np.logaddexp(0.0, scores.impostors()))
    return float(0.5 * (tgt + imp) / np.log(2.0))


@dataclass(frozen=True)
class CalibrationParams:
    """
    Monotone calibration llr = a · s + b of one subsystem.

    """

    a: float = 1.0
    b: float = 0.0
    system: str = ""
    degenerate: bool = False
    capped: bool = False

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise ConfigError(f"Calibration scale must be positive, got {self.a}")

    def apply(self, scores):
        return self.a * np.asarray(scores, dtype=float) + self.b


def _objective(
    a: float, b: float, tgt: np.ndarray, imp: np.ndarray, prior: float
) -> tuple[float, np.ndarray, np.ndarray]:
    offset = logit(prior)
    zt = a * tgt + b + offset
    zi = a * imp + b + offset

    value = prior * np.mean(np.logaddexp(0.0, -zt)) + (1.0 - prior) * np.mean(
        np.logaddexp(0.0, zi)
    )

    gt = -prior * expit(-zt) / len(tgt)
    gi = (1.0 - prior) * expit(zi) / len(imp)
    grad = np.array([gt @ tgt + gi @ imp, gt.sum() + gi.sum()])

    wt = prior * expit(zt) * expit(-zt) / len(tgt)
    wi = (1.0 - prior) * expit(zi) * expit(-zi) / len(imp)
    hess = np.array(
        [
            [wt @ tgt**2 + wi @ imp**2, wt @ tgt + wi @ imp],
            [wt @ tgt + wi @ imp, wt.sum() + wi.sum()],
        ]
    )

    return float(value), grad, hess


def _newton(
    x: np.ndarray,
    func: Callable[[np.ndarray], tuple[float, np.ndarray, np.ndarray]],
    stop: Callable[[np.ndarray], bool] = lambda x: False,
) -> np.ndarray:
    # Damped Newton with backtracking on a convex objective.
    value, grad, hess = func(x)
    for _ in range(MAX_ITERATIONS):
        if np.linalg.norm(grad) < GRADIENT_TOLERANCE or stop(x):
            break
        step = np.linalg.solve(hess + 1e-12 * np.eye(len(x)), grad)
        t = 1.0
        while True:
            candidate = x - t * step
            new_value, new_grad, new_hess = func(candidate)
            if new_value <= value - 1e-4 * t * grad @ step or t < 1e-10:
                break
            t *= 0.5
        if new_value > value:
            break
        x, value, grad, hess = candidate, new_value, new_grad, new_hess
    return x


def _fit(
    tgt: np.ndarray, imp: np.ndarray, prior: float, a_max: float, system: str
) -> tuple[float, float, bool, bool]:
    def full(x):
        return _objective(x[0], x[1], tgt, imp, prior)

    a, b = _newton(np.array([1.0, 0.0]), full, stop=lambda x: x[0] > a_max)

    degenerate = capped = False
    if a < A_MIN or a > a_max:
        degenerate = a < A_MIN
        capped = not degenerate
        a = A_MIN if degenerate else a_max

        def bias(x):
            value, grad, hess = _objective(a, x[0], tgt, imp, prior)
            return value, grad[1:], hess[1:, 1:]

        (b,) = _newton(np.array([b if np.isfinite(b) else 0.0]), bias)

        warnings.warn(
            f"Calibration of '{system}' "
            + ("has no positive scale" if degenerate else f"scale capped at {a_max:g}"),
            RuntimeWarning,
        )

    return float(a), float(b), bool(degenerate), bool(capped)


def calibrate_fit(
    scores: LabeledScoreSet, prior: Optional[float] = None, a_max: float = A_MAX
) -> CalibrationParams:
    """
    Fit llr = a · s + b minimizing the prior-weighted logistic loss.

    The training Cllr never increases: a fit at the requested prior that
    scores a higher Cllr than the raw scores is replaced, with a
    RuntimeWarning, by the fit at prior 0.5 (whose objective is the Cllr
    itself), and by the identity as a last resort.

    Parameters:
        scores : LabeledScoreSet
        prior : float
            Training prior; defaults to the effective prior of the default
            detection cost operating point.
        a_max : float
            Upper bound of the scale.

    Returns:
        CalibrationParams, flagged ``degenerate`` when the optimum has no
        positive scale and ``capped`` when the scale hit a_max.

    """
    scores.check()
    prior = DcfParams().effective_prior if prior is None else prior
    if not 0.0 < prior < 1.0:
        raise ConfigError(f"Invalid calibration prior: {prior}")

    tgt, imp = scores.targets(), scores.impostors()
    raw = cllr(scores)

    def training_cllr(a: float, b: float) -> float:
        return cllr(scores.transformed(a * scores.scores + b))

    a, b, degenerate, capped = _fit(tgt, imp, prior, a_max, scores.system)

    if prior != 0.5 and training_cllr(a, b) > raw:
        warnings.warn(
            f"Calibration of '{scores.system}' at prior {prior:g} raises the training Cllr "
            f"above {raw:.4f}; refitting at prior 0.5",
            RuntimeWarning,
        )
        a, b, degenerate, capped = _fit(tgt, imp, 0.5, a_max, scores.system)

    if training_cllr(a, b) > raw:
        a, b, degenerate, capped = 1.0, 0.0, False, False

    return CalibrationParams(a=a, b=b, system=scores.system, degenerate=degenerate, capped=capped)


class LinearCalibrator(BaseEstimator, TransformerMixin):
    """
    Estimator wrapper of :func:`calibrate_fit`: fit on scores and boolean
    target labels, transform scores to log-likelihood ratios.

    """

    def __init__(self, prior: Optional[float] = None, a_max: float = A_MAX) -> None:
        self.prior = prior
        self.a_max = a_max

    def fit(self, X: np.ndarray, y: np.ndarray) -> LinearCalibrator:
        self.params_ = calibrate_fit(
            LabeledScoreSet(scores=X, labels=y), prior=self.prior, a_max=self.a_max
        )
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        if not hasattr(self, "params_"):
            raise NotFittedError("LinearCalibrator is not fitted")
        return self.params_.apply(X)


def fuse(
    subsystem_scores: Sequence[ScoreSet],
    params: Sequence[CalibrationParams],
    system: str = "fusion",
) -> ScoreSet:
    """
    Equal-weight fusion Σ_k (a_k s_k + b_k) / K of aligned score sets.

    """
    if not subsystem_scores:
        raise DimensionError("nothing to fuse")
    if len(subsystem_scores) != len(params):
        raise DimensionError(f"{len(subsystem_scores)} score sets and {len(params)} calibrations")

    first = subsystem_scores[0]
    for other in subsystem_scores[1:]:
        first.check_aligned(other)

    fused = np.mean([p.apply(s.scores) for s, p in zip(subsystem_scores, params)], axis=0)

    return first.with_scores(fused, system=system)


def select_subsystems(
    dev_scores: dict[str, LabeledScoreSet],
    k: int = 1,
    group: Optional[Callable[[str], str]] = None,
    params: Optional[DcfParams] = None,
) -> list[str]:
    """
    The k systems of every group with the lowest development minDCF.

    Parameters:
        dev_scores : dict
            System name to development scores.
        k : int
        group : callable
            Maps a system name to its group, e.g. the embedding extractor;
            by default every system is its own group.
        params : DcfParams

    Returns:
        Selected system names, in the order of dev_scores.

    """
    if k < 1:
        raise ConfigError(f"Invalid number of subsystems: {k}")

    group = group or (lambda name: name)

    ranked: dict[str, list[tuple[float, int, str]]] = dict()
    for i, (name, scores) in enumerate(dev_scores.items()):
        cost, _ = min_dcf(scores, params)
        ranked.setdefault(group(name), list()).append((cost, i, name))

    selected = {name for entries in ranked.values() for _, _, name in sorted(entries)[:k]}

    return [name for name in dev_scores if name in selected]


def write_params(filename: str, params: Sequence[CalibrationParams], verbose: bool = False) -> None:
    """
    Write calibrations as ``{system: {a, b, degenerate, capped}}`` JSON.

    """
    document = dict()
    for p in params:
        entry = asdict(p)
        del entry["system"]
        document[p.system] = entry

    with open(filename, "w") as f:
        json.dump(document, f, indent=2)
        f.write("\n")

    if verbose:
        message(f"WRITTEN: {filename}")


def read_params(filename: str) -> list[CalibrationParams]:
    """
    Read calibrations written by :func:`write_params`.

    """
    try:
        with open(filename) as f:
            document = json.load(f)
        return [
            CalibrationParams(
                a=float(entry["a"]),
                b=float(entry["b"]),
                system=system,
                degenerate=bool(entry.get("degenerate", False)),
                capped=bool(entry.get("capped", False)),
            )
            for system, entry in document.items()
        ]
    except (json.JSONDecodeError, KeyError, TypeError, AttributeError) as e:
        raise FormatError(f"{filename}: {e}") from e

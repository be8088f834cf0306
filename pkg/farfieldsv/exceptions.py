#!/usr/bin/env python3
"""
Exceptions raised by farfieldsv.

Every exception derives from :class:`FsvError` and from the closest
built-in exception.

"""

from __future__ import annotations

from typing import Optional


class FsvError(Exception):
    """
    Base class of all farfieldsv errors.

    """


class ConfigError(FsvError, ValueError):
    """
    Invalid parameter or incompatible configuration.

    """


class ConfigValidationError(ConfigError):
    """
    Aggregated configuration violations.

    """

    def __init__(self, violations: list[str]) -> None:
        self.violations = list(violations)
        super().__init__(
            f"{len(self.violations)} configuration violation(s): "
            + "; ".join(self.violations)
        )


class TooShortError(FsvError, ValueError):
    """
    Input too short for the requested analysis.

    """


class DimensionError(FsvError, ValueError):
    """
    Shape, dimension or label range mismatch.

    """


class NonFiniteError(FsvError, ValueError):
    """
    NaN or Inf in the input.

    """


class ZeroVectorError(FsvError, ValueError):
    """
    Zero-norm vector where a direction is required.

    """


class SilentSignalError(FsvError, ValueError):
    """
    Signal without power.

    """


class InsufficientDataError(FsvError, ValueError):
    """
    Not enough data to train a model.

    """


class MissingClassError(FsvError, ValueError):
    """
    Score set without targets or without impostors.

    """


class DegenerateCohortError(FsvError, ArithmeticError):
    """
    Cohort with zero standard deviation.

    """


class MissingCohortError(FsvError, KeyError):
    """
    No cohort scores for an utterance.

    """

    def __init__(self, uid: str) -> None:
        self.uid = uid
        super().__init__(f"no cohort scores for utterance '{uid}'")

    def __str__(self) -> str:
        return self.args[0]


class AlignmentError(FsvError, ValueError):
    """
    Score sets not aligned on the same trial list.

    """


class DuplicateTrialError(FsvError, ValueError):
    """
    Repeated (enroll, test) pair.

    """


class DivergenceError(FsvError, ArithmeticError):
    """
    Training diverged.

    """

    def __init__(self, step: int, last_loss: Optional[float]) -> None:
        self.step = step
        self.last_loss = last_loss
        super().__init__(
            f"loss became NaN at step {step} (last finite loss: {last_loss})"
        )


class FormatError(FsvError, OSError):
    """
    File not in the expected binary or text format.

    """


class StageError(FsvError, RuntimeError):
    """
    Failure of a pipeline stage.

    """

    def __init__(
        self, stage: str, cause: BaseException, uid: Optional[str] = None
    ) -> None:
        self.stage = stage
        self.uid = uid
        self.cause = cause
        where = f" (utterance '{uid}')" if uid else ""
        super().__init__(f"stage '{stage}' failed{where}: {cause}")

    def __reduce__(self):
        return (self.__class__, (self.stage, self.cause, self.uid))

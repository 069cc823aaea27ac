from __future__ import annotations

import math
from dataclasses import dataclass

from unickit.exceptions.local_exceptions import InputDomainError
from unickit.geometry import CompBox


@dataclass(frozen=True)
class AnnotatedView:
    """Ground-truth view with its annotated quality score."""

    box: CompBox
    score: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.score):
            raise InputDomainError("score", self.score, "finite reals")


@dataclass(frozen=True)
class PredictedView:
    """Predicted view with a confidence in [0, 1]."""

    box: CompBox
    confidence: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.confidence <= 1.0):
            raise InputDomainError("confidence", self.confidence, "[0, 1]")

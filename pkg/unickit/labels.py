"""
Smooth labels for predictions left unmatched by the set matching.

Two sources are supported: quality guidance (the annotated score of the
best-overlapping annotated view, mapped linearly to [0, 1]) and
self-distillation (the confidence an EMA copy of the model assigns to
the same query). A schedule picks quality guidance first and switches
to self-distillation at a fixed iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np

from unickit.exceptions.local_exceptions import (
    ConfigurationError,
    InputDomainError,
    ShapeMismatchError,
)
from unickit.geometry import iou

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence

    import numpy.typing as npt

    from unickit.geometry import CompBox
    from unickit.views import AnnotatedView

DEFAULT_EMA_DECAY = 0.999
DEFAULT_SWITCH_ITERATION = 10_000


class LabelStrategy(str, Enum):
    QUALITY_GUIDANCE = "quality-guidance"
    SELF_DISTILLATION = "self-distillation"


@dataclass(frozen=True)
class QualityGuidanceConfig:
    s_lo: float
    s_hi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.s_lo) and math.isfinite(self.s_hi)):
            msg = "score range endpoints must be finite"
            raise ConfigurationError(msg)
        if self.s_hi <= self.s_lo:
            msg = (
                "score range needs s_hi > s_lo, "
                f"got {self.s_lo}, {self.s_hi}"
            )
            raise ConfigurationError(msg)

    @classmethod
    def from_scores(cls, scores: Iterable[float]) -> QualityGuidanceConfig:
        """Endpoints at the observed min/max annotated score."""
        values = list(scores)
        if not values:
            msg = "no annotated scores to derive a score range from"
            raise ConfigurationError(msg)
        return cls(min(values), max(values))


@dataclass(frozen=True)
class EmaState:
    values: npt.NDArray[np.float64]
    decay: float = DEFAULT_EMA_DECAY

    def __post_init__(self) -> None:
        if not (0.0 <= self.decay <= 1.0):
            raise InputDomainError("decay", self.decay, "[0, 1]")
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class LabelSchedule:
    switch_iteration: int = DEFAULT_SWITCH_ITERATION

    def __post_init__(self) -> None:
        if self.switch_iteration < 0:
            raise InputDomainError(
                "switch_iteration",
                self.switch_iteration,
                "[0, inf)",
            )


def quality_guided_label(
    pred_box: CompBox,
    annotated: Sequence[AnnotatedView],
    cfg: QualityGuidanceConfig,
) -> float:
    if not annotated:
        raise InputDomainError("annotated", [], "non-empty view lists")
    best_index = 0
    best_iou = -1.0
    # strict comparison keeps the lowest index on ties
    for index, view in enumerate(annotated):
        overlap = iou(pred_box, view.box)
        if overlap > best_iou:
            best_index, best_iou = index, overlap
    score = annotated[best_index].score
    mapped = (score - cfg.s_lo) / (cfg.s_hi - cfg.s_lo)
    return min(max(mapped, 0.0), 1.0)


def ema_update(state: EmaState, current: npt.ArrayLike) -> EmaState:
    current_values = np.asarray(current, dtype=np.float64).reshape(-1)
    if current_values.shape != state.values.shape:
        msg = (
            f"EMA holds {state.values.size} values, "
            f"update has {current_values.size}"
        )
        raise ShapeMismatchError(msg)
    if state.decay == 1.0:
        return state
    if state.decay == 0.0:
        return EmaState(values=current_values, decay=state.decay)
    # decay * v + (1 - decay) * c, written so that c == v is a fixed point
    blended = state.values + (1.0 - state.decay) * (
        current_values - state.values
    )
    return EmaState(values=blended, decay=state.decay)


def self_distilled_labels(
    teacher_confidences: Sequence[float],
    unmatched_indices: Iterable[int],
) -> dict[int, float]:
    labels: dict[int, float] = {}
    for index in sorted(set(unmatched_indices)):
        if not 0 <= index < len(teacher_confidences):
            raise InputDomainError(
                "unmatched index",
                index,
                f"[0, {len(teacher_confidences)})",
            )
        confidence = float(teacher_confidences[index])
        if not (0.0 <= confidence <= 1.0):
            raise InputDomainError("teacher confidence", confidence, "[0, 1]")
        labels[index] = confidence
    return labels


def strategy_for_iteration(
    sched: LabelSchedule,
    iteration: int,
) -> LabelStrategy:
    if iteration < sched.switch_iteration:
        return LabelStrategy.QUALITY_GUIDANCE
    return LabelStrategy.SELF_DISTILLATION


def smooth_labels(  # noqa: PLR0913
    *,
    iteration: int,
    schedule: LabelSchedule,
    pred_boxes: Sequence[CompBox],
    unmatched: Iterable[int],
    annotated: Sequence[AnnotatedView],
    quality_cfg: QualityGuidanceConfig,
    teacher_confidences: Sequence[float] | None = None,
) -> dict[int, float]:
    """Soft targets for the unmatched predictions at a training iteration."""
    indices = sorted(set(unmatched))
    strategy = strategy_for_iteration(schedule, iteration)
    if strategy is LabelStrategy.SELF_DISTILLATION:
        if teacher_confidences is None:
            msg = "self-distillation needs teacher confidences"
            raise ConfigurationError(msg)
        return self_distilled_labels(teacher_confidences, indices)
    labels: dict[int, float] = {}
    for index in indices:
        if not 0 <= index < len(pred_boxes):
            raise InputDomainError(
                "unmatched index",
                index,
                f"[0, {len(pred_boxes)})",
            )
        labels[index] = quality_guided_label(
            pred_boxes[index],
            annotated,
            quality_cfg,
        )
    return labels

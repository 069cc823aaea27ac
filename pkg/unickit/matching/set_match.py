"""Ground-truth padding, optimal matching and the composite set loss."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from unickit.exceptions.local_exceptions import (
    CapacityError,
    InputDomainError,
    ShapeMismatchError,
)
from unickit.losses import (
    LossBreakdown,
    LossWeights,
    loss_breakdown,
    pair_cost,
)
from unickit.matching.assignment import assignment_cost, solve_square

if TYPE_CHECKING:
    from collections.abc import Mapping, Sequence

    import numpy.typing as npt

    from unickit.geometry import CompBox
    from unickit.views import AnnotatedView, PredictedView

DEFAULT_NUM_QUERIES = 90


@dataclass(frozen=True)
class PaddedGtSlot:
    """A ground-truth slot; `box is None` marks the empty view."""

    box: CompBox | None
    p: float
    quality: float | None = None

    def __post_init__(self) -> None:
        if self.box is None:
            if self.p != 0.0 or self.quality is not None:
                msg = "empty slot must carry p=0 and no quality"
                raise InputDomainError("slot", msg, "valid slots")
        elif self.p != 1.0:
            raise InputDomainError("p", self.p, "{1} for a valid slot")

    @property
    def is_valid(self) -> bool:
        return self.box is not None

    @classmethod
    def empty(cls) -> PaddedGtSlot:
        return cls(box=None, p=0.0)


@dataclass(frozen=True)
class MatchAssignment:
    """sigma[i] is the slot matched to prediction i."""

    sigma: tuple[int, ...]
    total_cost: float

    def __post_init__(self) -> None:
        if sorted(self.sigma) != list(range(len(self.sigma))):
            msg = f"sigma {self.sigma} is not a permutation"
            raise ShapeMismatchError(msg)


def pad_ground_truth(
    gt: Sequence[AnnotatedView],
    n: int = DEFAULT_NUM_QUERIES,
) -> list[PaddedGtSlot]:
    if n < len(gt):
        raise CapacityError(n, len(gt))
    slots = [
        PaddedGtSlot(box=view.box, p=1.0, quality=view.score) for view in gt
    ]
    slots.extend(PaddedGtSlot.empty() for _ in range(n - len(gt)))
    return slots


def cost_matrix(
    preds: Sequence[PredictedView],
    slots: Sequence[PaddedGtSlot],
    w: LossWeights,
) -> npt.NDArray[np.float64]:
    """cost[i, j] = pair_cost(preds[i], slots[j])."""
    cost = np.empty((len(preds), len(slots)), dtype=np.float64)
    empty_column: list[float] | None = None
    for j, slot in enumerate(slots):
        if slot.is_valid:
            cost[:, j] = [pair_cost(pred, slot, w) for pred in preds]
            continue
        # every empty slot has the same column
        if empty_column is None:
            empty_column = [pair_cost(pred, slot, w) for pred in preds]
        cost[:, j] = empty_column
    return cost


def optimal_assignment(
    preds: Sequence[PredictedView],
    slots: Sequence[PaddedGtSlot],
    w: LossWeights,
) -> MatchAssignment:
    if len(preds) != len(slots):
        msg = f"{len(preds)} predictions vs {len(slots)} padded slots"
        raise ShapeMismatchError(msg)
    cost = cost_matrix(preds, slots, w)
    sigma, total = solve_square(cost)
    return MatchAssignment(sigma=tuple(sigma), total_cost=total)


def recompute_cost(
    preds: Sequence[PredictedView],
    slots: Sequence[PaddedGtSlot],
    assignment: MatchAssignment,
    w: LossWeights,
) -> float:
    return assignment_cost(
        cost_matrix(preds, slots, w),
        assignment.sigma,
    )


def composite_loss(
    preds: Sequence[PredictedView],
    slots: Sequence[PaddedGtSlot],
    assignment: MatchAssignment,
    w: LossWeights,
    soft_labels: Mapping[int, float] | None = None,
) -> LossBreakdown:
    """
    Set loss under a fixed matching.

    Box terms count only for predictions matched to valid slots. The
    focal term counts for all of them; `soft_labels` (prediction index
    -> target) replaces the 0 target of predictions matched to empty
    slots.
    """
    if not (len(preds) == len(slots) == len(assignment.sigma)):
        msg = (
            f"{len(preds)} predictions, {len(slots)} slots, "
            f"{len(assignment.sigma)} assignments"
        )
        raise ShapeMismatchError(msg)
    labels = soft_labels or {}
    parts = []
    for i, pred in enumerate(preds):
        slot = slots[assignment.sigma[i]]
        label = None if slot.is_valid else labels.get(i)
        parts.append(loss_breakdown(pred, slot, w, label=label))
    reg = math.fsum(part.reg for part in parts)
    giou = math.fsum(part.giou for part in parts)
    focal = math.fsum(part.focal for part in parts)
    return LossBreakdown.combine(reg, giou, focal, w)


def unmatched_indices(
    slots: Sequence[PaddedGtSlot],
    assignment: MatchAssignment,
) -> list[int]:
    """Predictions matched to empty slots."""
    return [
        i
        for i, slot_index in enumerate(assignment.sigma)
        if not slots[slot_index].is_valid
    ]

"""
Loss terms for one prediction / ground-truth pair.

The composite cost of a pair is

    reg + lambda_iou * giou + lambda_focal * focal

where the box terms only apply when the slot holds a real view. The same
quantity serves as matching cost and as training loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

from unickit.exceptions.local_exceptions import (
    ConfigurationError,
    InputDomainError,
)
from unickit.geometry import AREA_FLOOR, CompBox, to_corners

if TYPE_CHECKING:
    from unickit.matching.set_match import PaddedGtSlot
    from unickit.views import PredictedView

DEFAULT_LAMBDA_IOU = 2.0
DEFAULT_LAMBDA_FOCAL = 2.0
DEFAULT_BETA = 2.0
PROB_CLAMP = 1e-6
# Coordinates closer than this are treated as coincident (GIoU kinks).
KINK_TOLERANCE = 1e-12


class FocalForm(str, Enum):
    STANDARD = "standard"
    PRINTED = "printed"


@dataclass(frozen=True)
class LossWeights:
    lambda_iou: float = DEFAULT_LAMBDA_IOU
    lambda_focal: float = DEFAULT_LAMBDA_FOCAL
    beta: float = DEFAULT_BETA
    focal_form: FocalForm = FocalForm.STANDARD

    def __post_init__(self) -> None:
        for name in ("lambda_iou", "lambda_focal", "beta"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                msg = f"{name} must be a finite non-negative number"
                raise ConfigurationError(msg)
        object.__setattr__(self, "focal_form", FocalForm(self.focal_form))


@dataclass(frozen=True)
class LossBreakdown:
    reg: float
    giou: float
    focal: float
    total: float

    @classmethod
    def combine(
        cls,
        reg: float,
        giou: float,
        focal: float,
        weights: LossWeights,
    ) -> LossBreakdown:
        total = reg + weights.lambda_iou * giou + weights.lambda_focal * focal
        return cls(reg=reg, giou=giou, focal=focal, total=total)


@dataclass(frozen=True)
class LossGradient:
    """Partial derivatives of the pair cost w.r.t. (cx, cy, w, h, p)."""

    d_cx: float
    d_cy: float
    d_w: float
    d_h: float
    d_p: float
    at_kink: bool = False

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        return (self.d_cx, self.d_cy, self.d_w, self.d_h, self.d_p)


def reg_loss(pred: CompBox, gt: CompBox) -> float:
    return sum(
        abs(p - g) for p, g in zip(pred.as_tuple(), gt.as_tuple(), strict=True)
    )


def giou_loss(pred: CompBox, gt: CompBox) -> float:
    """1 - GIoU; 0 for identical boxes, approaching 2 far apart."""
    a = to_corners(pred)
    b = to_corners(gt)
    iw = max(min(a.x1, b.x1) - max(a.x0, b.x0), 0.0)
    ih = max(min(a.y1, b.y1) - max(a.y0, b.y0), 0.0)
    inter = iw * ih
    union = a.area + b.area - inter
    enclosing = (max(a.x1, b.x1) - min(a.x0, b.x0)) * (
        max(a.y1, b.y1) - min(a.y0, b.y0)
    )
    iou_value = inter / max(union, AREA_FLOOR)
    uncovered = (enclosing - union) / max(enclosing, AREA_FLOOR)
    return 1.0 - (iou_value - uncovered)


def _check_probability(name: str, value: float) -> None:
    if not (0.0 <= value <= 1.0):
        raise InputDomainError(name, value, "[0, 1]")


def _clamp(value: float) -> float:
    return min(max(value, PROB_CLAMP), 1.0 - PROB_CLAMP)


def focal_loss(
    p_pred: float,
    p: float,
    beta: float = DEFAULT_BETA,
) -> float:
    """
    Focal confidence loss with the prediction inside the logarithms.

    The modulating factor uses the raw prediction, so a prediction equal
    to a hard target gives exactly zero; the logs use the clamped value.
    """
    _check_probability("p_pred", p_pred)
    _check_probability("p", p)
    if beta < 0:
        raise InputDomainError("beta", beta, "[0, inf)")
    p_hat = _clamp(p_pred)
    bce = p * math.log(p_hat) + (1.0 - p) * math.log(1.0 - p_hat)
    return -(abs(p - p_pred) ** beta) * bce


def printed_focal_loss(
    p_pred: float,
    p: float,
    beta: float = DEFAULT_BETA,
) -> float:
    """Focal loss with the target inside the logs, clamped to stay finite."""
    _check_probability("p_pred", p_pred)
    _check_probability("p", p)
    if beta < 0:
        raise InputDomainError("beta", beta, "[0, inf)")
    p_tgt = _clamp(p)
    inner = (1.0 - p_pred) * math.log(1.0 - p_tgt) + p_pred * math.log(p_tgt)
    return -(abs(p_pred - p) ** beta) * inner


def confidence_loss(p_pred: float, p: float, weights: LossWeights) -> float:
    if weights.focal_form is FocalForm.PRINTED:
        return printed_focal_loss(p_pred, p, weights.beta)
    return focal_loss(p_pred, p, weights.beta)


def loss_breakdown(
    pred: PredictedView,
    gt: PaddedGtSlot,
    w: LossWeights,
    *,
    label: float | None = None,
) -> LossBreakdown:
    """
    Per-pair breakdown; `label` overrides the confidence target.

    Soft labels only ever replace the 0 target of an empty slot.
    """
    target = gt.p if label is None else label
    focal = confidence_loss(pred.confidence, target, w)
    if gt.box is None:
        return LossBreakdown.combine(0.0, 0.0, focal, w)
    return LossBreakdown.combine(
        reg_loss(pred.box, gt.box),
        giou_loss(pred.box, gt.box),
        focal,
        w,
    )


def pair_cost(pred: PredictedView, gt: PaddedGtSlot, w: LossWeights) -> float:
    return loss_breakdown(pred, gt, w).total


def _sign(value: float) -> float:
    if value > 0:
        return 1.0
    if value < 0:
        return -1.0
    return 0.0


def _power_derivative(diff: float, beta: float) -> tuple[float, bool]:
    """d/d(diff) of |diff|**beta and whether diff sits on a kink."""
    if beta == 0:
        return 0.0, False
    if diff == 0:
        return 0.0, beta < 1
    return beta * abs(diff) ** (beta - 1) * _sign(diff), False


def _focal_derivative(
    p_pred: float,
    p: float,
    weights: LossWeights,
) -> tuple[float, bool]:
    beta = weights.beta
    inside = PROB_CLAMP < p_pred < 1.0 - PROB_CLAMP
    p_hat = _clamp(p_pred)
    if weights.focal_form is FocalForm.PRINTED:
        p_tgt = _clamp(p)
        diff = p_pred - p
        inner = (1.0 - p_pred) * math.log(1.0 - p_tgt) + p_pred * math.log(
            p_tgt,
        )
        d_factor, kink = _power_derivative(diff, beta)
        d_inner = math.log(p_tgt) - math.log(1.0 - p_tgt)
        return -(d_factor * inner + abs(diff) ** beta * d_inner), kink
    # Standard form: L = -|p - x|^beta * (p log x^ + (1 - p) log(1 - x^)).
    diff = p_pred - p
    bce = p * math.log(p_hat) + (1.0 - p) * math.log(1.0 - p_hat)
    d_factor, kink = _power_derivative(diff, beta)
    d_bce = p / p_hat - (1.0 - p) / (1.0 - p_hat) if inside else 0.0
    on_clamp = p_pred in (PROB_CLAMP, 1.0 - PROB_CLAMP)
    return -(d_factor * bce + abs(diff) ** beta * d_bce), kink or on_clamp


def _near(a: float, b: float) -> bool:
    return abs(a - b) <= KINK_TOLERANCE


def _giou_corner_gradient(
    pred: CompBox,
    gt: CompBox,
) -> tuple[tuple[float, float, float, float], bool]:
    """Gradient of 1 - GIoU w.r.t. the prediction's (x0, x1, y0, y1)."""
    a = to_corners(pred)
    b = to_corners(gt)
    kink = any(
        _near(u, v)
        for u, v in (
            (a.x0, b.x0),
            (a.x1, b.x1),
            (a.y0, b.y0),
            (a.y1, b.y1),
            (a.x1, b.x0),
            (a.x0, b.x1),
            (a.y1, b.y0),
            (a.y0, b.y1),
        )
    )
    raw_iw = min(a.x1, b.x1) - max(a.x0, b.x0)
    raw_ih = min(a.y1, b.y1) - max(a.y0, b.y0)
    overlapping = raw_iw > 0 and raw_ih > 0
    iw = max(raw_iw, 0.0)
    ih = max(raw_ih, 0.0)
    inter = iw * ih
    union = a.area + b.area - inter
    ew = max(a.x1, b.x1) - min(a.x0, b.x0)
    eh = max(a.y1, b.y1) - min(a.y0, b.y0)
    enclosing = ew * eh

    pw = a.width
    ph = a.height
    # d(area_pred)/d(x0, x1, y0, y1)
    d_area = (-ph, ph, -pw, pw)
    if overlapping:
        d_inter = (
            -ih if a.x0 > b.x0 else 0.0,
            ih if a.x1 < b.x1 else 0.0,
            -iw if a.y0 > b.y0 else 0.0,
            iw if a.y1 < b.y1 else 0.0,
        )
    else:
        d_inter = (0.0, 0.0, 0.0, 0.0)
    d_enclosing = (
        -eh if a.x0 < b.x0 else 0.0,
        eh if a.x1 > b.x1 else 0.0,
        -ew if a.y0 < b.y0 else 0.0,
        ew if a.y1 > b.y1 else 0.0,
    )

    # loss = 2 - I/U - U/C
    grads = []
    for di, da, dc in zip(d_inter, d_area, d_enclosing, strict=True):
        du = da - di
        d_iou = (di * union - inter * du) / (union * union)
        d_ratio = (du * enclosing - union * dc) / (enclosing * enclosing)
        grads.append(-d_iou - d_ratio)
    return (grads[0], grads[1], grads[2], grads[3]), kink


def loss_gradients(
    pred: PredictedView,
    gt: PaddedGtSlot,
    w: LossWeights,
) -> LossGradient:
    """
    Analytic gradient of `pair_cost` w.r.t. (cx, cy, w, h, p_pred).

    At a kink the returned values form a subgradient and `at_kink` is
    set; the l1 term contributes 0 where a component matches exactly.
    """
    d_p, kink = _focal_derivative(pred.confidence, gt.p, w)
    d_p *= w.lambda_focal
    if gt.box is None:
        return LossGradient(0.0, 0.0, 0.0, 0.0, d_p, at_kink=kink)

    deltas = [
        p - g
        for p, g in zip(pred.box.as_tuple(), gt.box.as_tuple(), strict=True)
    ]
    reg = [_sign(d) for d in deltas]
    kink = kink or any(d == 0 for d in deltas)

    (gx0, gx1, gy0, gy1), giou_kink = _giou_corner_gradient(pred.box, gt.box)
    kink = kink or giou_kink
    # x0 = cx - w/2, x1 = cx + w/2 (likewise for y)
    giou = (
        gx0 + gx1,
        gy0 + gy1,
        (gx1 - gx0) / 2,
        (gy1 - gy0) / 2,
    )
    d_cx, d_cy, d_w, d_h = (
        r + w.lambda_iou * g for r, g in zip(reg, giou, strict=True)
    )
    return LossGradient(d_cx, d_cy, d_w, d_h, d_p, at_kink=kink)

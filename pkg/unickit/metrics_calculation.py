from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from unickit.concurrency import map_ordered
from unickit.exceptions.local_exceptions import (
    ConfigurationError,
    EvaluationError,
    UnknownImageError,
)
from unickit.geometry import iou, to_corners

if TYPE_CHECKING:
    from collections.abc import Mapping, Sequence

    from unickit.geometry import CompBox
    from unickit.views import AnnotatedView, PredictedView

DEFAULT_K_VALUES = (1, 5)
DEFAULT_N_VALUES = (5, 10)
DEFAULT_THRESHOLDS = (0.85, 0.90)

AccKey = tuple[int, int, float]


@dataclass(frozen=True)
class MetricsConfig:
    k_values: tuple[int, ...] = DEFAULT_K_VALUES
    n_values: tuple[int, ...] = DEFAULT_N_VALUES
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS

    def __post_init__(self) -> None:
        if not self.k_values or not self.n_values or not self.thresholds:
            msg = "k, n and threshold lists must be non-empty"
            raise ConfigurationError(msg)
        if any(k < 1 for k in self.k_values):
            msg = f"every K must be >= 1, got {list(self.k_values)}"
            raise ConfigurationError(msg)
        if any(n < 1 for n in self.n_values):
            msg = f"every N must be >= 1, got {list(self.n_values)}"
            raise ConfigurationError(msg)
        if any(not (0.0 < eps <= 1.0) for eps in self.thresholds):
            msg = f"thresholds must lie in (0, 1], got {list(self.thresholds)}"
            raise ConfigurationError(msg)


@dataclass(frozen=True)
class MetricsReport:
    acc: dict[AccKey, float]
    mean_iou: float
    mean_disp: float
    image_count: int
    short_gt_images: tuple[str, ...] = field(default=())


def acc_key_label(key: AccKey) -> str:
    k, n, eps = key
    return f"{k}/{n}@{eps:g}"


def rank_predictions(preds: Sequence[PredictedView]) -> list[PredictedView]:
    """Confidence descending; ties keep the lower index first."""
    order = sorted(range(len(preds)), key=lambda i: (-preds[i].confidence, i))
    return [preds[i] for i in order]


def rank_ground_truth(gts: Sequence[AnnotatedView]) -> list[AnnotatedView]:
    """Quality score descending; ties keep the lower index first."""
    order = sorted(range(len(gts)), key=lambda i: (-gts[i].score, i))
    return [gts[i] for i in order]


def _image_hits(
    image_id: str,
    preds: Sequence[PredictedView],
    gts: Sequence[AnnotatedView],
    k: int,
    n: int,
    eps: float,
) -> int:
    if len(preds) < k:
        msg = f"image '{image_id}' has {len(preds)} predictions, need {k}"
        raise EvaluationError(msg)
    if not gts:
        msg = f"image '{image_id}' has no annotated views"
        raise EvaluationError(msg)
    candidates = rank_ground_truth(gts)[:n]
    hits = 0
    for pred in rank_predictions(preds)[:k]:
        best = max(iou(pred.box, gt.box) for gt in candidates)
        if best >= eps:
            hits += 1
    return hits


def _lookup_gt(
    gts_per_image: Mapping[str, Sequence[AnnotatedView]],
    image_id: str,
) -> Sequence[AnnotatedView]:
    if image_id not in gts_per_image:
        raise UnknownImageError(image_id)
    return gts_per_image[image_id]


def acc_k_n(
    preds_per_image: Mapping[str, Sequence[PredictedView]],
    gts_per_image: Mapping[str, Sequence[AnnotatedView]],
    k: int,
    n: int,
    eps: float,
) -> float:
    """
    Share of top-K predictions whose best IoU with a top-N view is >= eps.

    Images with fewer than n annotated views use all of them. A view
    matched by two predictions counts for both.
    """
    if not preds_per_image:
        msg = "no predicted images to evaluate"
        raise EvaluationError(msg)
    hits = 0
    for image_id in sorted(preds_per_image):
        gts = _lookup_gt(gts_per_image, image_id)
        preds = preds_per_image[image_id]
        hits += _image_hits(image_id, preds, gts, k, n, eps)
    return hits / (len(preds_per_image) * k)


def disp(pred: CompBox, gt: CompBox) -> float:
    """Mean absolute displacement of the four box boundaries."""
    a = to_corners(pred)
    b = to_corners(gt)
    return (
        abs(a.x0 - b.x0)
        + abs(a.x1 - b.x1)
        + abs(a.y0 - b.y0)
        + abs(a.y1 - b.y1)
    ) / 4


@dataclass(frozen=True)
class _ImageResult:
    image_id: str
    hits: dict[AccKey, int]
    top_iou: float
    top_disp: float
    gt_count: int


def _evaluate_image(
    image_id: str,
    preds: Sequence[PredictedView],
    gts: Sequence[AnnotatedView],
    cfg: MetricsConfig,
) -> _ImageResult:
    if not preds:
        msg = f"image '{image_id}' has no predictions"
        raise EvaluationError(msg)
    hits = {
        (k, n, eps): _image_hits(image_id, preds, gts, k, n, eps)
        for k in cfg.k_values
        for n in cfg.n_values
        for eps in cfg.thresholds
    }
    top_pred = rank_predictions(preds)[0].box
    top_gt = rank_ground_truth(gts)[0].box
    return _ImageResult(
        image_id=image_id,
        hits=hits,
        top_iou=iou(top_pred, top_gt),
        top_disp=disp(top_pred, top_gt),
        gt_count=len(gts),
    )


def evaluate(
    annotations: Mapping[str, Sequence[AnnotatedView]],
    predictions: Mapping[str, Sequence[PredictedView]],
    cfg: MetricsConfig,
    *,
    threads: int | None = None,
) -> MetricsReport:
    """
    Accuracy table plus top-1 IoU and Disp averaged over images.

    Images are processed independently; sums use `math.fsum` over the
    sorted image ids so the report does not depend on input order.
    """
    if not predictions:
        msg = "prediction set is empty"
        raise EvaluationError(msg)
    image_ids = sorted(predictions)
    for image_id in image_ids:
        _lookup_gt(annotations, image_id)

    results = map_ordered(
        lambda image_id: _evaluate_image(
            image_id,
            predictions[image_id],
            annotations[image_id],
            cfg,
        ),
        image_ids,
        desc="Evaluating",
        threads=threads,
    )
    count = len(results)
    acc = {
        key: sum(r.hits[key] for r in results) / (count * key[0])
        for key in results[0].hits
    }
    largest_n = max(cfg.n_values)
    return MetricsReport(
        acc=acc,
        mean_iou=math.fsum(r.top_iou for r in results) / count,
        mean_disp=math.fsum(r.top_disp for r in results) / count,
        image_count=count,
        short_gt_images=tuple(
            r.image_id for r in results if r.gt_count < largest_n
        ),
    )

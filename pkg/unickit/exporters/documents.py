"""Builders for the JSON documents the subcommands emit."""

from __future__ import annotations

from datetime import datetime, timezone
from typing import TYPE_CHECKING, Any

from unickit import __version__
from unickit.formats.schemas import (
    FORMAT_MATCH,
    FORMAT_PREDICTIONS,
    FORMAT_REPORT,
    FORMAT_UIC,
)
from unickit.output_formatting import report_labels

if TYPE_CHECKING:
    from collections.abc import Mapping, Sequence

    from unickit.datagen.uic_datagen import (
        FullViewAnnotation,
        GenerationParams,
        SkippedImage,
        UicSample,
    )
    from unickit.losses import LossBreakdown
    from unickit.matching.set_match import MatchAssignment
    from unickit.metrics_calculation import MetricsConfig, MetricsReport
    from unickit.views import AnnotatedView, PredictedView


def _views(views: Sequence[AnnotatedView]) -> list[dict[str, Any]]:
    return [
        {"box": list(view.box.as_tuple()), "score": view.score}
        for view in views
    ]


def report_document(
    report: MetricsReport,
    cfg: MetricsConfig,
    inputs: Mapping[str, str],
    *,
    stamp: bool = False,
) -> dict[str, Any]:
    document: dict[str, Any] = {
        "format": FORMAT_REPORT,
        "version": __version__,
        "config": {
            "k": list(cfg.k_values),
            "n": list(cfg.n_values),
            "thresholds": list(cfg.thresholds),
        },
        "inputs": dict(inputs),
        "acc": report_labels(report),
        "mean_iou": report.mean_iou,
        "mean_disp": report.mean_disp,
        "image_count": report.image_count,
        "short_gt_images": list(report.short_gt_images),
    }
    if stamp:
        document["generated_at"] = datetime.now(tz=timezone.utc).isoformat(
            timespec="seconds",
        )
    return document


def uic_document(
    samples: Sequence[UicSample],
    skipped: Sequence[SkippedImage],
    params: GenerationParams,
    seed: int,
    annotations: Mapping[str, FullViewAnnotation],
) -> dict[str, Any]:
    """Sample file; init views also given in source-image pixels."""
    records = []
    for sample in samples:
        full = annotations[sample.image_id]
        init = sample.init_view
        records.append(
            {
                "id": sample.image_id,
                "width": full.width,
                "height": full.height,
                "init_view": list(init.as_tuple()),
                "init_view_px": [
                    init.x0 * full.width,
                    init.y0 * full.height,
                    init.x1 * full.width,
                    init.y1 * full.height,
                ],
                "views": _views(sample.gt_views),
            },
        )
    return {
        "format": FORMAT_UIC,
        "version": __version__,
        "seed": seed,
        "params": {
            "scale_range": list(params.scale_range),
            "visible_range": list(params.visible_range),
            "max_attempts": params.max_attempts,
        },
        "samples": records,
        "skipped": [
            {"id": item.image_id, "reason": item.reason} for item in skipped
        ],
    }


def predictions_document(
    predictions: Mapping[str, Sequence[PredictedView]],
) -> dict[str, Any]:
    return {
        "format": FORMAT_PREDICTIONS,
        "version": __version__,
        "images": [
            {
                "id": image_id,
                "views": [
                    {
                        "box": list(view.box.as_tuple()),
                        "confidence": view.confidence,
                    }
                    for view in views
                ],
            }
            for image_id, views in predictions.items()
        ],
    }


def match_record(  # noqa: PLR0913
    image_id: str,
    assignment: MatchAssignment,
    loss: LossBreakdown,
    matched_views: int,
    slots: int,
    soft_labels: Mapping[int, float] | None = None,
) -> dict[str, Any]:
    record: dict[str, Any] = {
        "id": image_id,
        "slots": slots,
        "matched_views": matched_views,
        "sigma": list(assignment.sigma),
        "total_cost": assignment.total_cost,
        "loss": {
            "reg": loss.reg,
            "giou": loss.giou,
            "focal": loss.focal,
            "total": loss.total,
        },
    }
    if soft_labels is not None:
        record["soft_labels"] = {
            str(index): value for index, value in sorted(soft_labels.items())
        }
    return record


def match_document(
    images: Sequence[dict[str, Any]],
    config: Mapping[str, Any],
    inputs: Mapping[str, str],
) -> dict[str, Any]:
    return {
        "format": FORMAT_MATCH,
        "version": __version__,
        "config": dict(config),
        "inputs": dict(inputs),
        "images": list(images),
    }

"""
Unbounded-composition samples from densely annotated crop datasets.

For each full image an initial view is drawn as an aspect-preserving
sub-window (same relative scale on both axes) and accepted when the
top-quality annotated view keeps only part of its area inside it. All
annotated views are then re-expressed in initial-view coordinates, so
at least one of them leaves [0, 1]^2.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from unickit.concurrency import map_ordered
from unickit.exceptions.local_exceptions import (
    ConfigurationError,
    GenerationFailureError,
    InputDomainError,
    InvalidBoxError,
    NotUnboundedError,
)
from unickit.geometry import CompBox, CornerBox, to_corners
from unickit.log_utils import get_logger
from unickit.metrics_calculation import rank_ground_truth
from unickit.views import AnnotatedView

if TYPE_CHECKING:
    from collections.abc import Sequence

logger = get_logger(__name__)

DEFAULT_SCALE_RANGE = (0.5, 0.8)
DEFAULT_VISIBLE_RANGE = (0.3, 0.9)
DEFAULT_MAX_ATTEMPTS = 1000
# Slack for in-frame checks on annotation boxes that touch the border.
FRAME_TOLERANCE = 1e-9
# Initial views read back from 9-significant-digit files.
SQUARE_TOLERANCE = 1e-6

UNIT_FRAME = CornerBox(0.0, 0.0, 1.0, 1.0)


@dataclass(frozen=True)
class FullViewAnnotation:
    image_id: str
    width: int
    height: int
    views: tuple[AnnotatedView, ...]

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise InputDomainError(
                f"{self.image_id} size",
                (self.width, self.height),
                "positive pixel dimensions",
            )
        if not self.views:
            raise InputDomainError(
                f"{self.image_id} views",
                [],
                "non-empty view lists",
            )
        for view in self.views:
            if not is_inside(to_corners(view.box), UNIT_FRAME):
                msg = (
                    f"view {view.box.as_tuple()} of image "
                    f"'{self.image_id}' leaves the full image"
                )
                raise InvalidBoxError(msg)


@dataclass(frozen=True)
class UicSample:
    image_id: str
    init_view: CornerBox
    gt_views: tuple[AnnotatedView, ...]


@dataclass(frozen=True)
class GenerationParams:
    scale_range: tuple[float, float] = DEFAULT_SCALE_RANGE
    visible_range: tuple[float, float] = DEFAULT_VISIBLE_RANGE
    max_attempts: int = DEFAULT_MAX_ATTEMPTS

    def __post_init__(self) -> None:
        for name in ("scale_range", "visible_range"):
            lo, hi = getattr(self, name)
            if not (0.0 < lo <= hi < 1.0):
                msg = f"{name} must satisfy 0 < lo <= hi < 1, got {lo}, {hi}"
                raise ConfigurationError(msg)
        if self.max_attempts < 1:
            msg = f"max_attempts must be >= 1, got {self.max_attempts}"
            raise ConfigurationError(msg)


@dataclass(frozen=True)
class SkippedImage:
    image_id: str
    reason: str


def is_inside(
    inner: CornerBox,
    outer: CornerBox,
    tolerance: float = FRAME_TOLERANCE,
) -> bool:
    return (
        inner.x0 >= outer.x0 - tolerance
        and inner.y0 >= outer.y0 - tolerance
        and inner.x1 <= outer.x1 + tolerance
        and inner.y1 <= outer.y1 + tolerance
    )


def is_unbounded(views: Sequence[AnnotatedView]) -> bool:
    """True when some view has a corner outside [0, 1]^2."""
    return any(
        not is_inside(to_corners(view.box), UNIT_FRAME, 0.0) for view in views
    )


def visible_fraction(box: CornerBox, frame: CornerBox) -> float:
    """Share of `box` area lying inside `frame`."""
    iw = max(min(box.x1, frame.x1) - max(box.x0, frame.x0), 0.0)
    ih = max(min(box.y1, frame.y1) - max(box.y0, frame.y0), 0.0)
    return iw * ih / box.area


def renormalize_box(box: CompBox, init: CornerBox) -> CompBox:
    """Full-image coordinates -> coordinates of the initial view."""
    return CompBox(
        (box.cx - init.x0) / init.width,
        (box.cy - init.y0) / init.height,
        box.w / init.width,
        box.h / init.height,
    )


def denormalize_box(box: CompBox, init: CornerBox) -> CompBox:
    """Inverse of `renormalize_box`."""
    return CompBox(
        box.cx * init.width + init.x0,
        box.cy * init.height + init.y0,
        box.w * init.width,
        box.h * init.height,
    )


def build_sample(full: FullViewAnnotation, init: CornerBox) -> UicSample:
    views = tuple(
        AnnotatedView(renormalize_box(view.box, init), view.score)
        for view in full.views
    )
    if not is_unbounded(views):
        raise NotUnboundedError(full.image_id)
    return UicSample(image_id=full.image_id, init_view=init, gt_views=views)


def image_seed(master_seed: int, image_id: str) -> np.random.SeedSequence:
    """Per-image seed independent of processing order."""
    digest = hashlib.sha256(image_id.encode("utf-8")).digest()
    return np.random.SeedSequence(
        [master_seed, int.from_bytes(digest[:8], "little")],
    )


def _draw_init_view(
    rng: np.random.Generator,
    params: GenerationParams,
) -> CornerBox | None:
    scale = float(rng.uniform(*params.scale_range))
    x0 = float(rng.uniform(0.0, 1.0 - scale))
    y0 = float(rng.uniform(0.0, 1.0 - scale))
    x1 = x0 + scale
    y1 = y0 + scale
    # strictly inside the full image
    if x0 <= 0.0 or y0 <= 0.0 or x1 >= 1.0 or y1 >= 1.0:
        return None
    return CornerBox(x0, y0, x1, y1)


def generate_sample(
    full: FullViewAnnotation,
    params: GenerationParams,
    rng_seed: int,
) -> UicSample:
    rng = np.random.default_rng(image_seed(rng_seed, full.image_id))
    top_view = to_corners(rank_ground_truth(full.views)[0].box)
    lo, hi = params.visible_range
    for attempt in range(1, params.max_attempts + 1):
        init = _draw_init_view(rng, params)
        if init is None:
            continue
        fraction = visible_fraction(top_view, init)
        if not (lo <= fraction <= hi):
            continue
        try:
            sample = build_sample(full, init)
        except NotUnboundedError:
            continue
        logger.debug(
            "image %s accepted after %d attempts (visible %.3f)",
            full.image_id,
            attempt,
            fraction,
        )
        return sample
    raise GenerationFailureError(full.image_id, params.max_attempts)


def generate_dataset(
    annotations: Sequence[FullViewAnnotation],
    params: GenerationParams,
    seed: int,
    *,
    threads: int | None = None,
) -> tuple[list[UicSample], list[SkippedImage]]:
    """Samples in input order, plus the images that could not be used."""

    def _one(full: FullViewAnnotation) -> UicSample | SkippedImage:
        try:
            return generate_sample(full, params, seed)
        except GenerationFailureError as exc:
            return SkippedImage(image_id=full.image_id, reason=str(exc))

    outcomes = map_ordered(
        _one,
        list(annotations),
        desc="Generating",
        threads=threads,
    )
    samples = [o for o in outcomes if isinstance(o, UicSample)]
    skipped = [o for o in outcomes if isinstance(o, SkippedImage)]
    logger.info(
        "generated %d samples, skipped %d images",
        len(samples),
        len(skipped),
    )
    return samples, skipped


def sample_visible_fraction(sample: UicSample) -> float:
    """Visible share of the top-quality view, from init-view coordinates."""
    top = to_corners(rank_ground_truth(sample.gt_views)[0].box)
    return visible_fraction(top, UNIT_FRAME)


def is_strictly_inside_frame(init: CornerBox) -> bool:
    return init.x0 > 0.0 and init.y0 > 0.0 and init.x1 < 1.0 and init.y1 < 1.0


def relative_scale(init: CornerBox) -> float:
    """Scale of an aspect-preserving initial view; NaN when not square."""
    if not math.isclose(init.width, init.height, rel_tol=SQUARE_TOLERANCE):
        return math.nan
    return init.width

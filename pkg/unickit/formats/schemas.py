"""
JSON interchange formats and their schema checks.

Every checker returns a list of human-readable violations naming the
offending record (e.g. ``images[2].views[0].confidence``); loaders raise
`SchemaError` with that list when it is non-empty.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from unickit.datagen.uic_datagen import (
    FullViewAnnotation,
    UicSample,
    is_strictly_inside_frame,
    is_unbounded,
    relative_scale,
    sample_visible_fraction,
)
from unickit.exceptions.local_exceptions import SchemaError
from unickit.geometry import CompBox, CornerBox, to_corners
from unickit.views import AnnotatedView, PredictedView

FORMAT_ANNOTATIONS = "annotations"
FORMAT_PREDICTIONS = "predictions"
FORMAT_UIC = "uic-samples"
FORMAT_REPORT = "report"
FORMAT_MATCH = "match-results"
KNOWN_FORMATS = (
    FORMAT_ANNOTATIONS,
    FORMAT_PREDICTIONS,
    FORMAT_UIC,
    FORMAT_REPORT,
    FORMAT_MATCH,
)
# Written files carry 9 significant digits; re-checks allow for that.
ROUNDING_TOLERANCE = 1e-6
LOSS_TERMS = 4
ACC_KEY_PATTERN = re.compile(r"^(\d+)/(\d+)@([0-9.]+)$")


def read_json(path: str | Path) -> Any:  # noqa: ANN401
    source = str(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(source, [f"cannot read file: {exc}"]) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        detail = f"malformed JSON at line {exc.lineno}, column {exc.colno}"
        raise SchemaError(source, [f"{detail}: {exc.msg}"]) from None


def _is_number(value: object) -> bool:
    return (
        isinstance(value, (int, float))
        and not isinstance(value, bool)
        and math.isfinite(value)
    )


def _is_count(value: object) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _number_list(value: object, length: int) -> list[float] | None:
    if not isinstance(value, list) or len(value) != length:
        return None
    if not all(_is_number(v) for v in value):
        return None
    return [float(v) for v in value]


def check_box(
    value: object,
    where: str,
    violations: list[str],
) -> CompBox | None:
    numbers = _number_list(value, 4)
    if numbers is None:
        violations.append(
            f"{where}: expected [cx, cy, w, h] of finite numbers",
        )
        return None
    cx, cy, w, h = numbers
    if w <= 0 or h <= 0:
        violations.append(f"{where}: width and height must be positive")
        return None
    return CompBox(cx, cy, w, h)


def check_corners(
    value: object,
    where: str,
    violations: list[str],
) -> CornerBox | None:
    numbers = _number_list(value, 4)
    if numbers is None:
        violations.append(f"{where}: expected [x0, y0, x1, y1] of numbers")
        return None
    x0, y0, x1, y1 = numbers
    if not (x0 < x1 and y0 < y1):
        violations.append(f"{where}: corners must satisfy x0 < x1, y0 < y1")
        return None
    return CornerBox(x0, y0, x1, y1)


def _image_list(
    doc: object,
    key: str,
    violations: list[str],
) -> list[dict[str, Any]]:
    if not isinstance(doc, dict):
        violations.append("document: expected a JSON object")
        return []
    records = doc.get(key)
    if not isinstance(records, list):
        violations.append(f"{key}: expected a list")
        return []
    kept = []
    for index, record in enumerate(records):
        if isinstance(record, dict):
            kept.append(record)
        else:
            violations.append(f"{key}[{index}]: expected an object")
            kept.append({})
    return kept


def _image_id(
    record: dict[str, Any],
    where: str,
    seen: set[str],
    violations: list[str],
) -> str | None:
    image_id = record.get("id")
    if not isinstance(image_id, str) or not image_id:
        violations.append(f"{where}.id: expected a non-empty string")
        return None
    if image_id in seen:
        violations.append(f"{where}.id: duplicate id '{image_id}'")
        return None
    seen.add(image_id)
    return image_id


def _annotated_views(
    record: dict[str, Any],
    where: str,
    violations: list[str],
) -> list[AnnotatedView]:
    views = record.get("views")
    if not isinstance(views, list) or not views:
        violations.append(f"{where}.views: expected a non-empty list")
        return []
    parsed = []
    for index, view in enumerate(views):
        at = f"{where}.views[{index}]"
        if not isinstance(view, dict):
            violations.append(f"{at}: expected an object")
            continue
        box = check_box(view.get("box"), f"{at}.box", violations)
        score = view.get("score")
        if not _is_number(score):
            violations.append(f"{at}.score: expected a finite number")
            continue
        if box is not None:
            parsed.append(AnnotatedView(box, float(score)))
    return parsed


def _pixel_size(
    record: dict[str, Any],
    where: str,
    violations: list[str],
) -> tuple[int, int]:
    sizes = []
    for key in ("width", "height"):
        value = record.get(key)
        if not _is_count(value) or value < 1:
            violations.append(f"{where}.{key}: expected a positive integer")
            sizes.append(1)
        else:
            sizes.append(value)
    return sizes[0], sizes[1]


@dataclass(frozen=True)
class AnnotationRecord:
    image_id: str
    width: int
    height: int
    views: tuple[AnnotatedView, ...]


def parse_annotations(
    doc: object,
    *,
    require_in_frame: bool = False,
) -> tuple[list[AnnotationRecord], list[str]]:
    violations: list[str] = []
    seen: set[str] = set()
    images = []
    for index, record in enumerate(_image_list(doc, "images", violations)):
        where = f"images[{index}]"
        image_id = _image_id(record, where, seen, violations)
        width, height = _pixel_size(record, where, violations)
        before = len(violations)
        views = _annotated_views(record, where, violations)
        if require_in_frame:
            for v_index, view in enumerate(views):
                c = to_corners(view.box)
                if c.x0 < 0 or c.y0 < 0 or c.x1 > 1 or c.y1 > 1:
                    violations.append(
                        f"{where}.views[{v_index}].box: leaves the full "
                        "image [0, 1]^2",
                    )
        if image_id is None or len(violations) > before:
            continue
        images.append(
            AnnotationRecord(image_id, width, height, tuple(views)),
        )
    return images, violations


def parse_predictions(
    doc: object,
) -> tuple[dict[str, list[PredictedView]], list[str]]:
    violations: list[str] = []
    seen: set[str] = set()
    parsed: dict[str, list[PredictedView]] = {}
    for index, record in enumerate(_image_list(doc, "images", violations)):
        where = f"images[{index}]"
        image_id = _image_id(record, where, seen, violations)
        views = record.get("views")
        if not isinstance(views, list) or not views:
            violations.append(f"{where}.views: expected a non-empty list")
            continue
        preds = []
        for v_index, view in enumerate(views):
            at = f"{where}.views[{v_index}]"
            if not isinstance(view, dict):
                violations.append(f"{at}: expected an object")
                continue
            box = check_box(view.get("box"), f"{at}.box", violations)
            if "confidence" not in view:
                violations.append(f"{at}.confidence: missing")
                continue
            confidence = view["confidence"]
            if not _is_number(confidence) or not 0 <= confidence <= 1:
                violations.append(
                    f"{at}.confidence: {confidence!r} is not in [0, 1]",
                )
                continue
            if box is not None:
                preds.append(PredictedView(box, float(confidence)))
        if image_id is not None and len(preds) == len(views):
            parsed[image_id] = preds
    return parsed, violations


def _range_pair(value: object) -> tuple[float, float] | None:
    numbers = _number_list(value, 2)
    if numbers is None or numbers[0] > numbers[1]:
        return None
    return numbers[0], numbers[1]


def parse_uic(doc: object) -> tuple[list[UicSample], list[str]]:
    """Samples plus violations, including the unbounded property."""
    violations: list[str] = []
    params = doc.get("params") if isinstance(doc, dict) else None
    scale_range = visible_range = None
    if isinstance(params, dict):
        scale_range = _range_pair(params.get("scale_range"))
        visible_range = _range_pair(params.get("visible_range"))
    if scale_range is None or visible_range is None:
        violations.append(
            "params: expected scale_range and visible_range as [lo, hi]",
        )
    seen: set[str] = set()
    samples = []
    for index, record in enumerate(_image_list(doc, "samples", violations)):
        where = f"samples[{index}]"
        image_id = _image_id(record, where, seen, violations)
        before = len(violations)
        init = check_corners(
            record.get("init_view"),
            f"{where}.init_view",
            violations,
        )
        views = _annotated_views(record, where, violations)
        if image_id is None or init is None or len(violations) > before:
            continue
        sample = UicSample(image_id, init, tuple(views))
        _check_sample(sample, where, scale_range, visible_range, violations)
        samples.append(sample)
    return samples, violations


def _check_sample(
    sample: UicSample,
    where: str,
    scale_range: tuple[float, float] | None,
    visible_range: tuple[float, float] | None,
    violations: list[str],
) -> None:
    if not is_strictly_inside_frame(sample.init_view):
        violations.append(f"{where}.init_view: not strictly inside [0, 1]^2")
    if not is_unbounded(sample.gt_views):
        violations.append(
            f"{where}: unbounded property violated, every view lies "
            "inside [0, 1]^2",
        )
    scale = relative_scale(sample.init_view)
    if scale_range is not None and not (
        scale_range[0] - ROUNDING_TOLERANCE
        <= scale
        <= scale_range[1] + ROUNDING_TOLERANCE
    ):
        violations.append(
            f"{where}.init_view: relative scale {scale} outside "
            f"{list(scale_range)}",
        )
    fraction = sample_visible_fraction(sample)
    if visible_range is not None and not (
        visible_range[0] - ROUNDING_TOLERANCE
        <= fraction
        <= visible_range[1] + ROUNDING_TOLERANCE
    ):
        violations.append(
            f"{where}: visible fraction {fraction:.6f} of the top view "
            f"outside {list(visible_range)}",
        )


def check_report(doc: object) -> list[str]:
    violations: list[str] = []
    if not isinstance(doc, dict):
        return ["document: expected a JSON object"]
    acc = doc.get("acc")
    if not isinstance(acc, dict) or not acc:
        violations.append("acc: expected a non-empty object")
    else:
        for key, value in acc.items():
            if not ACC_KEY_PATTERN.match(key):
                violations.append(f"acc.{key}: key must look like 'K/N@eps'")
            if not _is_number(value) or not 0 <= value <= 1:
                violations.append(f"acc.{key}: {value!r} is not in [0, 1]")
    mean_iou = doc.get("mean_iou")
    if not _is_number(mean_iou) or not 0 <= mean_iou <= 1:
        violations.append(f"mean_iou: {mean_iou!r} is not in [0, 1]")
    mean_disp = doc.get("mean_disp")
    if not _is_number(mean_disp) or mean_disp < 0:
        violations.append(f"mean_disp: {mean_disp!r} must be >= 0")
    count = doc.get("image_count")
    if not _is_count(count) or count < 1:
        violations.append(f"image_count: {count!r} must be a positive integer")
    return violations


def check_match(doc: object) -> list[str]:
    violations: list[str] = []
    for index, record in enumerate(_image_list(doc, "images", violations)):
        where = f"images[{index}]"
        sigma = record.get("sigma")
        if not isinstance(sigma, list) or sorted(sigma) != list(
            range(len(sigma)),
        ):
            violations.append(f"{where}.sigma: expected a permutation")
        total = record.get("total_cost")
        if not _is_number(total):
            violations.append(f"{where}.total_cost: expected a finite number")
        loss = record.get("loss")
        terms = (
            [loss.get(k) for k in ("reg", "giou", "focal", "total")]
            if isinstance(loss, dict)
            else []
        )
        if len(terms) != LOSS_TERMS or not all(_is_number(t) for t in terms):
            violations.append(
                f"{where}.loss: expected finite reg, giou, focal, total",
            )
        elif any(t < 0 for t in terms):
            violations.append(f"{where}.loss: terms must be non-negative")
    return violations


def detect_kind(doc: object) -> str:
    if isinstance(doc, dict):
        tagged = doc.get("format")
        if tagged in KNOWN_FORMATS:
            return str(tagged)
        if "samples" in doc:
            return FORMAT_UIC
        images = doc.get("images")
        if isinstance(images, list):
            for image in images:
                views = image.get("views") if isinstance(image, dict) else None
                if isinstance(views, list) and views:
                    first = views[0]
                    if isinstance(first, dict) and "confidence" in first:
                        return FORMAT_PREDICTIONS
                    break
    return FORMAT_ANNOTATIONS


def validate_document(doc: object) -> tuple[str, list[str]]:
    """Detect the file kind and list every schema violation."""
    kind = detect_kind(doc)
    if kind == FORMAT_PREDICTIONS:
        _, violations = parse_predictions(doc)
    elif kind == FORMAT_UIC:
        _, violations = parse_uic(doc)
    elif kind == FORMAT_REPORT:
        violations = check_report(doc)
    elif kind == FORMAT_MATCH:
        violations = check_match(doc)
    else:
        _, violations = parse_annotations(doc)
    return kind, violations


def load_full_view_annotations(path: str | Path) -> list[FullViewAnnotation]:
    """In-frame annotations used as generator input."""
    images, violations = parse_annotations(
        read_json(path),
        require_in_frame=True,
    )
    if violations:
        raise SchemaError(str(path), violations)
    return [
        FullViewAnnotation(
            image_id=r.image_id,
            width=r.width,
            height=r.height,
            views=r.views,
        )
        for r in images
    ]


def load_ground_truth(path: str | Path) -> dict[str, list[AnnotatedView]]:
    """Annotated views per image from an annotation or UIC sample file."""
    doc = read_json(path)
    if detect_kind(doc) == FORMAT_UIC:
        samples, violations = parse_uic(doc)
        if violations:
            raise SchemaError(str(path), violations)
        return {s.image_id: list(s.gt_views) for s in samples}
    images, violations = parse_annotations(doc)
    if violations:
        raise SchemaError(str(path), violations)
    return {image.image_id: list(image.views) for image in images}


def load_predictions(path: str | Path) -> dict[str, list[PredictedView]]:
    parsed, violations = parse_predictions(read_json(path))
    if violations:
        raise SchemaError(str(path), violations)
    return parsed

from __future__ import annotations

import sys
import time
from typing import TYPE_CHECKING, Any

from unickit.concurrency import map_ordered
from unickit.datagen.uic_datagen import GenerationParams, generate_dataset
from unickit.exceptions.local_exceptions import (
    EXIT_SCHEMA,
    ConfigurationError,
    FeatureGridMismatchError,
    NoSamplesGeneratedError,
    SchemaError,
    ShapeMismatchError,
    UnknownImageError,
)
from unickit.exporters.documents import (
    match_document,
    match_record,
    predictions_document,
    report_document,
    uic_document,
)
from unickit.exporters.json_export import export_json, file_digest
from unickit.formats.schemas import (
    load_full_view_annotations,
    load_ground_truth,
    load_predictions,
    read_json,
    validate_document,
)
from unickit.labels import (
    LabelSchedule,
    QualityGuidanceConfig,
    smooth_labels,
)
from unickit.log_utils import get_logger
from unickit.losses import FocalForm, LossWeights
from unickit.matching.set_match import (
    composite_loss,
    optimal_assignment,
    pad_ground_truth,
    unmatched_indices,
)
from unickit.metrics_calculation import MetricsConfig, evaluate
from unickit.output_formatting import (
    generate_match_table,
    generate_report_table,
)
from unickit.tinynet.features import (
    grid_size,
    read_feature_file,
    synth_features,
)
from unickit.tinynet.model import (
    TinyNetConfig,
    init_weights,
    run_pipeline,
    to_predicted_views,
)

if TYPE_CHECKING:
    from unickit.cli.parse_cmd_line import (
        DemoForwardArgs,
        EvalArgs,
        GenUicArgs,
        MatchArgs,
        ValidateArgs,
    )
    from unickit.tinynet.features import FeatureGrid
    from unickit.views import AnnotatedView, PredictedView

logger = get_logger(__name__)


def _elapsed(start_time: float) -> str:
    return f"{time.time() - start_time:.2f} seconds"


def cmd_eval(args: EvalArgs) -> int:
    start_time = time.time()
    logger.debug("Starting eval")
    annotations = load_ground_truth(args["annotations"])
    predictions = load_predictions(args["predictions"])
    logger.debug(
        "Loaded %d annotated and %d predicted images in %s",
        len(annotations),
        len(predictions),
        _elapsed(start_time),
    )
    cfg = MetricsConfig(
        k_values=tuple(args["k_values"]),
        n_values=tuple(args["n_values"]),
        thresholds=tuple(args["thresholds"]),
    )
    report = evaluate(annotations, predictions, cfg)
    if args["output_format"] == "table":
        print(generate_report_table(report))  # noqa: T201
        if args["output_path"] is None:
            return 0
    document = report_document(
        report,
        cfg,
        {
            "annotations": file_digest(args["annotations"]),
            "predictions": file_digest(args["predictions"]),
        },
        stamp=args["stamp"],
    )
    export_json(document, args["output_path"])
    logger.debug("Finished eval in %s", _elapsed(start_time))
    return 0


def cmd_gen_uic(args: GenUicArgs) -> int:
    start_time = time.time()
    logger.debug("Starting gen-uic with seed %d", args["seed"])
    params = GenerationParams(
        scale_range=args["scale_range"],
        visible_range=args["visible_range"],
        max_attempts=args["max_attempts"],
    )
    annotations = load_full_view_annotations(args["annotations"])
    samples, skipped = generate_dataset(annotations, params, args["seed"])
    for item in skipped:
        logger.warning("Skipped %s: %s", item.image_id, item.reason)
    if not samples:
        raise NoSamplesGeneratedError(len(skipped))
    document = uic_document(
        samples,
        skipped,
        params,
        args["seed"],
        {full.image_id: full for full in annotations},
    )
    export_json(document, args["output_path"])
    logger.debug(
        "Finished gen-uic: %d samples, %d skipped in %s",
        len(samples),
        len(skipped),
        _elapsed(start_time),
    )
    return 0


def _quality_config(
    args: MatchArgs,
    annotations: dict[str, list[AnnotatedView]],
) -> QualityGuidanceConfig:
    if args["score_range"] is not None:
        return QualityGuidanceConfig(*args["score_range"])
    try:
        return QualityGuidanceConfig.from_scores(
            view.score for views in annotations.values() for view in views
        )
    except ConfigurationError:
        msg = "annotated scores do not span a range; pass --score-range"
        raise ConfigurationError(msg) from None


def _match_image(  # noqa: PLR0913
    image_id: str,
    preds: list[PredictedView],
    gts: list[AnnotatedView],
    args: MatchArgs,
    weights: LossWeights,
    teacher: dict[str, list[PredictedView]] | None,
    quality_cfg: QualityGuidanceConfig | None,
) -> dict[str, Any]:
    slot_count = args["num_slots"]
    slots = pad_ground_truth(
        gts,
        len(preds) if slot_count is None else slot_count,
    )
    if len(slots) != len(preds):
        msg = (
            f"image '{image_id}' has {len(preds)} predictions "
            f"but --n is {len(slots)}"
        )
        raise ShapeMismatchError(msg)
    assignment = optimal_assignment(preds, slots, weights)
    soft_labels = None
    if quality_cfg is not None:
        teacher_views = (teacher or {}).get(image_id)
        soft_labels = smooth_labels(
            iteration=args["iteration"],
            schedule=LabelSchedule(args["switch_iteration"]),
            pred_boxes=[pred.box for pred in preds],
            unmatched=unmatched_indices(slots, assignment),
            annotated=gts,
            quality_cfg=quality_cfg,
            teacher_confidences=None
            if teacher_views is None
            else [view.confidence for view in teacher_views],
        )
    loss = composite_loss(preds, slots, assignment, weights, soft_labels)
    return match_record(
        image_id,
        assignment,
        loss,
        matched_views=len(gts),
        slots=len(slots),
        soft_labels=soft_labels,
    )


def cmd_match(args: MatchArgs) -> int:
    start_time = time.time()
    logger.debug("Starting match")
    annotations = load_ground_truth(args["gt"])
    predictions = load_predictions(args["pred"])
    teacher = (
        load_predictions(args["teacher"])
        if args["teacher"] is not None
        else None
    )
    weights = LossWeights(
        lambda_iou=args["lambda_iou"],
        lambda_focal=args["lambda_focal"],
        beta=args["beta"],
        focal_form=FocalForm(args["focal_form"]),
    )
    quality_cfg = (
        _quality_config(args, annotations)
        if args["soft_labels"] == "schedule"
        else None
    )
    image_ids = sorted(predictions)
    for image_id in image_ids:
        if image_id not in annotations:
            raise UnknownImageError(image_id)

    images = map_ordered(
        lambda image_id: _match_image(
            image_id,
            predictions[image_id],
            annotations[image_id],
            args,
            weights,
            teacher,
            quality_cfg,
        ),
        image_ids,
        desc="Matching",
    )
    if args["output_format"] == "table":
        print(generate_match_table(images))  # noqa: T201
        if args["output_path"] is None:
            return 0
    config: dict[str, Any] = {
        "lambda_iou": weights.lambda_iou,
        "lambda_focal": weights.lambda_focal,
        "beta": weights.beta,
        "focal_form": weights.focal_form.value,
        "n": args["num_slots"],
        "soft_labels": args["soft_labels"],
    }
    if quality_cfg is not None:
        config["iteration"] = args["iteration"]
        config["switch_iteration"] = args["switch_iteration"]
        config["score_range"] = [quality_cfg.s_lo, quality_cfg.s_hi]
    inputs = {
        "gt": file_digest(args["gt"]),
        "pred": file_digest(args["pred"]),
    }
    document = match_document(images, config, inputs)
    export_json(document, args["output_path"])
    logger.debug(
        "Finished match for %d images in %s",
        len(images),
        _elapsed(start_time),
    )
    return 0


def _load_grid(args: DemoForwardArgs) -> FeatureGrid:
    height, width = grid_size(args["height"], args["width"])
    if args["features"] is None:
        return synth_features(args["height"], args["width"], args["seed"])
    grid = read_feature_file(args["features"])
    if (grid.height, grid.width) != (height, width):
        raise FeatureGridMismatchError(
            (grid.height, grid.width),
            (args["height"], args["width"]),
            (height, width),
        )
    return grid


def cmd_demo_forward(args: DemoForwardArgs) -> int:
    start_time = time.time()
    grid = _load_grid(args)
    config = TinyNetConfig(
        channels=grid.channels,
        heads=args["heads"],
        fem_layers=args["fem_layers"],
        decoder_layers=args["decoder_layers"],
        pad_tokens=args["pad_tokens"],
        queries=args["queries"],
        seed=args["seed"],
    )
    logger.debug(
        "Running forward pass on a %dx%dx%d grid",
        grid.channels,
        grid.height,
        grid.width,
    )
    trace = run_pipeline(grid, init_weights(config))
    views = to_predicted_views(trace)
    export_json(
        predictions_document({args["image_id"]: views}),
        args["output_path"],
    )
    logger.debug("Finished demo-forward in %s", _elapsed(start_time))
    return 0


def cmd_validate(args: ValidateArgs) -> int:
    failed = False
    for path in args["files"]:
        try:
            kind, violations = validate_document(read_json(path))
        except SchemaError as exc:
            failed = True
            print(f"Error: {exc}", file=sys.stderr)  # noqa: T201
            continue
        if violations:
            failed = True
            error = SchemaError(path, violations)
            print(f"Error: {error}", file=sys.stderr)  # noqa: T201
            continue
        print(f"{path}: valid {kind} file")  # noqa: T201
    return EXIT_SCHEMA if failed else 0

# argparse front end for the five subcommands. Every long flag can also
# be set in a TOML file under a table named after the subcommand; flags
# given on the command line win over the file, the file over defaults.
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import TYPE_CHECKING, Literal, NoReturn, TypedDict

import tomllib

from unickit import __version__
from unickit.datagen.uic_datagen import (
    DEFAULT_MAX_ATTEMPTS,
    DEFAULT_SCALE_RANGE,
    DEFAULT_VISIBLE_RANGE,
)
from unickit.exceptions.local_exceptions import ConfigurationError
from unickit.labels import DEFAULT_SWITCH_ITERATION
from unickit.losses import (
    DEFAULT_BETA,
    DEFAULT_LAMBDA_FOCAL,
    DEFAULT_LAMBDA_IOU,
    FocalForm,
)
from unickit.metrics_calculation import (
    DEFAULT_K_VALUES,
    DEFAULT_N_VALUES,
    DEFAULT_THRESHOLDS,
)
from unickit.tinynet.model import TinyNetConfig

if TYPE_CHECKING:
    from collections.abc import Iterable, Sequence


class CommonArgs(TypedDict):
    debug: bool


class EvalArgs(CommonArgs):
    """Type definition for `eval` arguments returned by parse_cmd_line."""

    command: Literal["eval"]
    annotations: str
    predictions: str
    k_values: list[int]
    n_values: list[int]
    thresholds: list[float]
    output_path: str | None
    output_format: str
    stamp: bool


class GenUicArgs(CommonArgs):
    command: Literal["gen-uic"]
    annotations: str
    seed: int
    scale_range: tuple[float, float]
    visible_range: tuple[float, float]
    max_attempts: int
    output_path: str | None


class MatchArgs(CommonArgs):
    command: Literal["match"]
    gt: str
    pred: str
    lambda_iou: float
    lambda_focal: float
    beta: float
    focal_form: str
    num_slots: int | None
    soft_labels: str
    iteration: int
    switch_iteration: int
    teacher: str | None
    score_range: tuple[float, float] | None
    output_path: str | None
    output_format: str


class DemoForwardArgs(CommonArgs):
    command: Literal["demo-forward"]
    height: int
    width: int
    seed: int
    features: str | None
    queries: int
    pad_tokens: int
    heads: int
    fem_layers: int
    decoder_layers: int
    image_id: str
    output_path: str | None


class ValidateArgs(CommonArgs):
    command: Literal["validate"]
    files: list[str]


CommandLineArgs = (
    EvalArgs | GenUicArgs | MatchArgs | DemoForwardArgs | ValidateArgs
)

OUTPUT_FORMATS = ("json", "table")
SOFT_LABEL_MODES = ("none", "schedule")
DEFAULT_IMAGE_ID = "demo"
_TINYNET_DEFAULTS = TinyNetConfig()


def print_toml_version() -> None:
    print(f"Current version is {__version__}")  # noqa: T201


def _config_error(message: str) -> NoReturn:
    raise ConfigurationError(message)


def _load_config(path: str) -> dict[str, object]:
    config_path = Path(path).expanduser()
    try:
        with config_path.open("rb") as config_file:
            return tomllib.load(config_file)
    except FileNotFoundError:
        _config_error(f"Configuration file not found: {config_path}")
    except tomllib.TOMLDecodeError as exc:
        _config_error(f"Failed to parse configuration file: {exc}")
    except OSError as exc:
        _config_error(f"Unable to read configuration file: {exc}")


def _command_table(
    config: dict[str, object],
    command: str,
) -> dict[str, object]:
    table = config.get(command, {})
    if not isinstance(table, dict):
        _config_error(f"[{command}] must be a table in the configuration file")
    return table


def _pick(
    flag_value: object | None,
    config: dict[str, object],
    key: str,
) -> object | None:
    return flag_value if flag_value is not None else config.get(key)


def _parse_sequence(value: object | None, field_name: str) -> list[str]:
    if value is None:
        return []
    if isinstance(value, str):
        raw_items: Iterable[object] = value.split(",")
    elif isinstance(value, (list, tuple)):
        raw_items = value
    else:
        _config_error(
            f"{field_name} must be provided as a comma-separated string "
            "or array",
        )

    items: list[str] = []
    for item in raw_items:
        if isinstance(item, bool) or not isinstance(item, (str, int, float)):
            _config_error(f"All values for {field_name} must be numbers")
        stripped = str(item).strip()
        if stripped:
            items.append(stripped)
    return items


def _parse_ints(value: object | None, field_name: str) -> list[int]:
    try:
        return [int(item) for item in _parse_sequence(value, field_name)]
    except ValueError:
        _config_error(
            f"{field_name} must be a list of integers, got {value!r}",
        )


def _parse_floats(value: object | None, field_name: str) -> list[float]:
    try:
        return [float(item) for item in _parse_sequence(value, field_name)]
    except ValueError:
        _config_error(
            f"{field_name} must be a list of numbers, got {value!r}",
        )


def _parse_range(
    value: object | None,
    field_name: str,
    fallback: tuple[float, float] | None,
) -> tuple[float, float] | None:
    if value is None:
        return fallback
    bounds = _parse_floats(value, field_name)
    if len(bounds) != 2:  # noqa: PLR2004
        _config_error(f"{field_name} must be given as lo,hi")
    return bounds[0], bounds[1]


def _get_optional_str(config: dict[str, object], key: str) -> str | None:
    value = config.get(key)
    if value is None:
        return None
    if isinstance(value, str):
        return value
    _config_error(f"{key} must be a string in the configuration file")


def _get_config_bool(config: dict[str, object], key: str) -> bool:
    value = config.get(key)
    if value is None:
        return False
    if isinstance(value, bool):
        return value
    _config_error(f"{key} must be a boolean in the configuration file")


def _get_int(value: object | None, key: str, fallback: int) -> int:
    if value is None:
        return fallback
    if isinstance(value, bool):
        _config_error(f"{key} must be an integer")
    try:
        return int(str(value))
    except ValueError:
        _config_error(f"{key} must be an integer, got {value!r}")


def _get_float(value: object | None, key: str, fallback: float) -> float:
    if value is None:
        return fallback
    if isinstance(value, bool):
        _config_error(f"{key} must be a number")
    try:
        return float(str(value))
    except ValueError:
        _config_error(f"{key} must be a number, got {value!r}")


def _require_str(value: object | None, key: str) -> str:
    if value is None:
        _config_error(f"--{key} is required (flag or configuration file)")
    if not isinstance(value, str):
        _config_error(f"{key} must be a string in the configuration file")
    return value


def _choice(value: object | None, key: str, allowed: Sequence[str]) -> str:
    chosen = value if value is not None else allowed[0]
    if chosen not in allowed:
        _config_error(f"{key} must be one of: {', '.join(allowed)}")
    return str(chosen)


def _build_parser() -> argparse.ArgumentParser:
    description = """Toolkit for unbounded image composition: evaluate
    composition views, synthesize unbounded samples from annotated crops,
    inspect the set-prediction matching and run a deterministic forward
    pass of the view predictor.
    """
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "-c",
        "--config",
        dest="config",
        help="Path to a TOML configuration file",
    )
    common.add_argument(
        "--debug",
        action="store_true",
        default=None,
        help="Log progress details to stderr",
    )

    parser = argparse.ArgumentParser(prog="unic-kit", description=description)
    parser.add_argument(
        "-v",
        "--version",
        action="store_true",
        help="Print version and exit",
    )
    subparsers = parser.add_subparsers(dest="command")

    eval_parser = subparsers.add_parser(
        "eval",
        parents=[common],
        help="Score predicted views against annotated views",
    )
    eval_parser.add_argument("--annotations", help="Annotation or UIC file")
    eval_parser.add_argument("--predictions", help="Prediction file")
    eval_parser.add_argument("--k", help="Comma-separated K values (1,5)")
    eval_parser.add_argument("--n", help="Comma-separated N values (5,10)")
    eval_parser.add_argument(
        "--thresholds",
        help="Comma-separated IoU thresholds (0.85,0.9)",
    )
    eval_parser.add_argument("--out", help="Report path (default: stdout)")
    eval_parser.add_argument("--format", choices=OUTPUT_FORMATS)
    eval_parser.add_argument(
        "--stamp",
        action="store_true",
        default=None,
        help="Embed a UTC timestamp in the report",
    )

    gen_parser = subparsers.add_parser(
        "gen-uic",
        parents=[common],
        help="Synthesize unbounded samples from in-frame annotations",
    )
    gen_parser.add_argument("--annotations", help="Annotation file")
    gen_parser.add_argument("--seed", help="Master seed (default 0)")
    gen_parser.add_argument(
        "--scale-range",
        help="Relative scale bounds of the initial view, lo,hi",
    )
    gen_parser.add_argument(
        "--visible-frac",
        help="Visible-area bounds of the top-quality view, lo,hi",
    )
    gen_parser.add_argument(
        "--max-attempts",
        help="Draws per image before it is skipped",
    )
    gen_parser.add_argument("--out", help="Sample path (default: stdout)")

    match_parser = subparsers.add_parser(
        "match",
        parents=[common],
        help="Optimal matching and set loss per image",
    )
    match_parser.add_argument("--gt", help="Annotation or UIC file")
    match_parser.add_argument("--pred", help="Prediction file")
    match_parser.add_argument("--lambda-iou", help="GIoU weight")
    match_parser.add_argument("--lambda-focal", help="Focal weight")
    match_parser.add_argument("--beta", help="Focal exponent")
    match_parser.add_argument(
        "--focal-form",
        choices=[form.value for form in FocalForm],
    )
    match_parser.add_argument(
        "--n",
        help="Slots per image (default: the image's prediction count)",
    )
    match_parser.add_argument("--soft-labels", choices=SOFT_LABEL_MODES)
    match_parser.add_argument("--iteration", help="Training iteration")
    match_parser.add_argument(
        "--switch-iteration",
        help="Iteration at which self-distillation takes over",
    )
    match_parser.add_argument(
        "--teacher",
        help="Prediction file from the EMA model (self-distillation)",
    )
    match_parser.add_argument(
        "--score-range",
        help="Annotated score range mapped to [0, 1], lo,hi",
    )
    match_parser.add_argument("--out", help="Result path (default: stdout)")
    match_parser.add_argument("--format", choices=OUTPUT_FORMATS)

    demo_parser = subparsers.add_parser(
        "demo-forward",
        parents=[common],
        help="Deterministic forward pass producing predicted views",
    )
    demo_parser.add_argument("--height", help="Image height, multiple of 32")
    demo_parser.add_argument("--width", help="Image width, multiple of 32")
    demo_parser.add_argument("--seed", help="Feature and weight seed")
    demo_parser.add_argument(
        "--features",
        help="Backbone feature file ('C H W' header, float32 payload)",
    )
    demo_parser.add_argument("--queries", help="Predicted views N")
    demo_parser.add_argument("--pad-tokens", help="Extrapolated tokens M")
    demo_parser.add_argument("--heads", help="Attention heads")
    demo_parser.add_argument("--fem-layers", help="Extrapolation blocks")
    demo_parser.add_argument("--decoder-layers", help="Decoder blocks")
    demo_parser.add_argument("--image-id", help="Id written to the file")
    demo_parser.add_argument("--out", help="Prediction path (default: stdout)")

    validate_parser = subparsers.add_parser(
        "validate",
        parents=[common],
        help="Re-check the schema of any file the toolkit reads or writes",
    )
    validate_parser.add_argument("files", nargs="+", help="Files to check")
    return parser


def _eval_args(
    args: argparse.Namespace,
    cfg: dict[str, object],
    debug: bool,  # noqa: FBT001
) -> EvalArgs:
    return EvalArgs(
        command="eval",
        debug=debug,
        annotations=_require_str(
            _pick(args.annotations, cfg, "annotations"),
            "annotations",
        ),
        predictions=_require_str(
            _pick(args.predictions, cfg, "predictions"),
            "predictions",
        ),
        k_values=_parse_ints(_pick(args.k, cfg, "k"), "k")
        or list(DEFAULT_K_VALUES),
        n_values=_parse_ints(_pick(args.n, cfg, "n"), "n")
        or list(DEFAULT_N_VALUES),
        thresholds=_parse_floats(
            _pick(args.thresholds, cfg, "thresholds"),
            "thresholds",
        )
        or list(DEFAULT_THRESHOLDS),
        output_path=args.out or _get_optional_str(cfg, "out"),
        output_format=_choice(
            _pick(args.format, cfg, "format"),
            "format",
            OUTPUT_FORMATS,
        ),
        stamp=bool(args.stamp) or _get_config_bool(cfg, "stamp"),
    )


def _gen_uic_args(
    args: argparse.Namespace,
    cfg: dict[str, object],
    debug: bool,  # noqa: FBT001
) -> GenUicArgs:
    scale_range = _parse_range(
        _pick(args.scale_range, cfg, "scale-range"),
        "scale-range",
        DEFAULT_SCALE_RANGE,
    )
    visible_range = _parse_range(
        _pick(args.visible_frac, cfg, "visible-frac"),
        "visible-frac",
        DEFAULT_VISIBLE_RANGE,
    )
    if scale_range is None or visible_range is None:
        _config_error("scale-range and visible-frac need lo,hi bounds")
    return GenUicArgs(
        command="gen-uic",
        debug=debug,
        annotations=_require_str(
            _pick(args.annotations, cfg, "annotations"),
            "annotations",
        ),
        seed=_get_int(_pick(args.seed, cfg, "seed"), "seed", 0),
        scale_range=scale_range,
        visible_range=visible_range,
        max_attempts=_get_int(
            _pick(args.max_attempts, cfg, "max-attempts"),
            "max-attempts",
            DEFAULT_MAX_ATTEMPTS,
        ),
        output_path=args.out or _get_optional_str(cfg, "out"),
    )


def _match_args(
    args: argparse.Namespace,
    cfg: dict[str, object],
    debug: bool,  # noqa: FBT001
) -> MatchArgs:
    slots = _pick(args.n, cfg, "n")
    return MatchArgs(
        command="match",
        debug=debug,
        gt=_require_str(_pick(args.gt, cfg, "gt"), "gt"),
        pred=_require_str(_pick(args.pred, cfg, "pred"), "pred"),
        lambda_iou=_get_float(
            _pick(args.lambda_iou, cfg, "lambda-iou"),
            "lambda-iou",
            DEFAULT_LAMBDA_IOU,
        ),
        lambda_focal=_get_float(
            _pick(args.lambda_focal, cfg, "lambda-focal"),
            "lambda-focal",
            DEFAULT_LAMBDA_FOCAL,
        ),
        beta=_get_float(_pick(args.beta, cfg, "beta"), "beta", DEFAULT_BETA),
        focal_form=_choice(
            _pick(args.focal_form, cfg, "focal-form"),
            "focal-form",
            [form.value for form in FocalForm],
        ),
        num_slots=None if slots is None else _get_int(slots, "n", 0),
        soft_labels=_choice(
            _pick(args.soft_labels, cfg, "soft-labels"),
            "soft-labels",
            SOFT_LABEL_MODES,
        ),
        iteration=_get_int(
            _pick(args.iteration, cfg, "iteration"),
            "iteration",
            0,
        ),
        switch_iteration=_get_int(
            _pick(args.switch_iteration, cfg, "switch-iteration"),
            "switch-iteration",
            DEFAULT_SWITCH_ITERATION,
        ),
        teacher=args.teacher or _get_optional_str(cfg, "teacher"),
        score_range=_parse_range(
            _pick(args.score_range, cfg, "score-range"),
            "score-range",
            None,
        ),
        output_path=args.out or _get_optional_str(cfg, "out"),
        output_format=_choice(
            _pick(args.format, cfg, "format"),
            "format",
            OUTPUT_FORMATS,
        ),
    )


def _demo_forward_args(
    args: argparse.Namespace,
    cfg: dict[str, object],
    debug: bool,  # noqa: FBT001
) -> DemoForwardArgs:
    height = _pick(args.height, cfg, "height")
    width = _pick(args.width, cfg, "width")
    if height is None or width is None:
        _config_error("--height and --width are required")
    return DemoForwardArgs(
        command="demo-forward",
        debug=debug,
        height=_get_int(height, "height", 0),
        width=_get_int(width, "width", 0),
        seed=_get_int(_pick(args.seed, cfg, "seed"), "seed", 0),
        features=args.features or _get_optional_str(cfg, "features"),
        queries=_get_int(
            _pick(args.queries, cfg, "queries"),
            "queries",
            _TINYNET_DEFAULTS.queries,
        ),
        pad_tokens=_get_int(
            _pick(args.pad_tokens, cfg, "pad-tokens"),
            "pad-tokens",
            _TINYNET_DEFAULTS.pad_tokens,
        ),
        heads=_get_int(
            _pick(args.heads, cfg, "heads"),
            "heads",
            _TINYNET_DEFAULTS.heads,
        ),
        fem_layers=_get_int(
            _pick(args.fem_layers, cfg, "fem-layers"),
            "fem-layers",
            _TINYNET_DEFAULTS.fem_layers,
        ),
        decoder_layers=_get_int(
            _pick(args.decoder_layers, cfg, "decoder-layers"),
            "decoder-layers",
            _TINYNET_DEFAULTS.decoder_layers,
        ),
        image_id=args.image_id
        or _get_optional_str(cfg, "image-id")
        or DEFAULT_IMAGE_ID,
        output_path=args.out or _get_optional_str(cfg, "out"),
    )


def parse_cmd_line(argv: Sequence[str] | None = None) -> CommandLineArgs:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.version:
        print_toml_version()
        sys.exit(0)
    if args.command is None:
        parser.error("a subcommand is required")

    config: dict[str, object] = {}
    if args.config:
        config = _load_config(args.config)
    table = _command_table(config, args.command)
    debug = bool(args.debug) or _get_config_bool(config, "debug")

    if args.command == "eval":
        return _eval_args(args, table, debug)
    if args.command == "gen-uic":
        return _gen_uic_args(args, table, debug)
    if args.command == "match":
        return _match_args(args, table, debug)
    if args.command == "demo-forward":
        return _demo_forward_args(args, table, debug)
    return ValidateArgs(command="validate", debug=debug, files=args.files)

from __future__ import annotations

import hashlib
import json
import math
import sys
from pathlib import Path
from typing import Any

SIGNIFICANT_DIGITS = 9


def round_floats(
    value: Any,  # noqa: ANN401
    digits: int = SIGNIFICANT_DIGITS,
) -> Any:  # noqa: ANN401
    """Round every float in a JSON-ready structure to `digits` figures."""
    if isinstance(value, float):
        if not math.isfinite(value):
            msg = f"cannot serialize non-finite value {value}"
            raise ValueError(msg)
        rounded = float(f"{value:.{digits}g}")
        return rounded + 0.0  # folds -0.0 into 0.0
    if isinstance(value, dict):
        return {key: round_floats(item, digits) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_floats(item, digits) for item in value]
    return value


def dumps_document(document: dict[str, Any]) -> str:
    """Deterministic text form: rounded floats, stable key order."""
    return (
        json.dumps(round_floats(document), indent=2, allow_nan=False) + "\n"
    )


def export_json(document: dict[str, Any], output_path: str | None) -> None:
    """Write the document to `output_path`, or standard output when None."""
    text = dumps_document(document)
    if output_path is None:
        sys.stdout.write(text)
        return
    with Path(output_path).open("w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def file_digest(path: str | Path) -> str:
    return "sha256:" + hashlib.sha256(Path(path).read_bytes()).hexdigest()

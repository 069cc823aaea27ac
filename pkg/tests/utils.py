# Python
import itertools
import json
from pathlib import Path
from typing import Any

import numpy as np

from unickit.geometry import CompBox
from unickit.views import AnnotatedView, PredictedView

FIXTURES = Path("tests/fixtures")


def read_fixture(name: str) -> Any:
    with (FIXTURES / name).open("r") as file:
        return json.load(file)


def fixture_path(name: str) -> str:
    return str(FIXTURES / name)


def read_eval_annotations_file() -> dict[str, Any]:
    return read_fixture("eval_annotations.json")


def read_eval_predictions_file() -> dict[str, Any]:
    return read_fixture("eval_predictions.json")


def write_json(path: Path, document: Any) -> str:
    with path.open("w") as file:
        json.dump(document, file, indent=2)
    return str(path)


def annotated_views(records: list[dict[str, Any]]) -> list[AnnotatedView]:
    return [
        AnnotatedView(CompBox(*view["box"]), view["score"])
        for view in records
    ]


def predicted_views(records: list[dict[str, Any]]) -> list[PredictedView]:
    return [
        PredictedView(CompBox(*view["box"]), view["confidence"])
        for view in records
    ]


def clone_predictions(annotations: dict[str, Any]) -> dict[str, Any]:
    """Prediction document whose views copy the annotated ones."""
    return {
        "images": [
            {
                "id": image["id"],
                "views": [
                    {"box": view["box"], "confidence": view["score"]}
                    for view in image["views"]
                ],
            }
            for image in annotations["images"]
        ],
    }


def random_box(
    rng: np.random.Generator,
    low: float = -0.5,
    high: float = 1.5,
) -> CompBox:
    return CompBox(
        float(rng.uniform(low, high)),
        float(rng.uniform(low, high)),
        float(rng.uniform(0.05, 1.0)),
        float(rng.uniform(0.05, 1.0)),
    )


def random_predictions(
    rng: np.random.Generator,
    count: int,
) -> list[PredictedView]:
    return [
        PredictedView(random_box(rng), float(rng.uniform(0.0, 1.0)))
        for _ in range(count)
    ]


def random_annotations(
    rng: np.random.Generator,
    count: int,
) -> list[AnnotatedView]:
    return [
        AnnotatedView(random_box(rng), float(rng.uniform(0.0, 5.0)))
        for _ in range(count)
    ]


def brute_force_assignment(
    cost: np.ndarray,
) -> tuple[tuple[int, ...], float]:
    """
    Exhaustive minimum over all permutations.

    Costs are accumulated column by column in row order, the same
    summation order `assignment_cost` uses, so totals compare exactly.
    The first minimum in lexicographic order is returned.
    """
    n = cost.shape[0]
    if n == 0:
        return (), 0.0
    perms = np.array(list(itertools.permutations(range(n))))
    values = cost[np.arange(n)[None, :], perms]
    totals = values[:, 0].copy()
    for column in range(1, n):
        totals += values[:, column]
    best = int(np.argmin(totals))
    return tuple(int(i) for i in perms[best]), float(totals[best])


def full_view_document(
    rng: np.random.Generator,
    images: int,
) -> dict[str, Any]:
    """In-frame annotation document with 2-5 views per image."""
    records = []
    for index in range(images):
        views = []
        for _ in range(int(rng.integers(2, 6))):
            w = float(rng.uniform(0.4, 0.9))
            h = float(rng.uniform(0.4, 0.9))
            cx = float(rng.uniform(w / 2, 1 - w / 2))
            cy = float(rng.uniform(h / 2, 1 - h / 2))
            views.append(
                {"box": [cx, cy, w, h], "score": float(rng.uniform(1, 5))},
            )
        records.append(
            {
                "id": f"img-{index:04d}",
                "width": 1024,
                "height": 768,
                "views": views,
            },
        )
    return {"images": records}

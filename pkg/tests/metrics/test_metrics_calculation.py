import unittest
from typing import Any

import numpy as np

from tests.constants import (
    EXPECTED_ACC,
    EXPECTED_MEAN_DISP,
    EXPECTED_MEAN_IOU,
    METRIC_TOLERANCE,
)
from tests.utils import (
    annotated_views,
    clone_predictions,
    predicted_views,
    random_annotations,
    random_box,
    read_eval_annotations_file,
    read_eval_predictions_file,
)
from unickit.exceptions.local_exceptions import (
    ConfigurationError,
    EvaluationError,
    UnknownImageError,
)
from unickit.geometry import CompBox, CornerBox, from_corners
from unickit.metrics_calculation import (
    MetricsConfig,
    acc_k_n,
    acc_key_label,
    disp,
    evaluate,
    rank_ground_truth,
    rank_predictions,
)
from unickit.views import AnnotatedView, PredictedView


def _annotations() -> dict[str, list[AnnotatedView]]:
    doc = read_eval_annotations_file()
    return {
        image["id"]: annotated_views(image["views"])
        for image in doc["images"]
    }


def _predictions(
    doc: dict[str, Any] | None = None,
) -> dict[str, list[PredictedView]]:
    doc = doc or read_eval_predictions_file()
    return {
        image["id"]: predicted_views(image["views"])
        for image in doc["images"]
    }


class TestDisp(unittest.TestCase):
    def test_identical_boxes(self) -> None:
        box = CompBox(0.3, 0.7, 0.2, 0.4)
        self.assertEqual(disp(box, box), 0.0)

    def test_shifted_box(self) -> None:
        a = from_corners(CornerBox(0.0, 0.0, 1.0, 1.0))
        b = from_corners(CornerBox(0.1, 0.0, 1.1, 1.0))
        self.assertAlmostEqual(disp(a, b), 0.05)

    def test_grown_box(self) -> None:
        a = from_corners(CornerBox(0.0, 0.0, 1.0, 1.0))
        b = from_corners(CornerBox(0.0, 0.0, 1.1, 1.1))
        self.assertAlmostEqual(disp(a, b), 0.05)


class TestRanking(unittest.TestCase):
    def test_predictions_sorted_by_confidence_stable(self) -> None:
        box = CompBox(0.5, 0.5, 0.1, 0.1)
        preds = [
            PredictedView(box, 0.2),
            PredictedView(box.translated(1, 0), 0.9),
            PredictedView(box.translated(2, 0), 0.2),
        ]
        ranked = rank_predictions(preds)
        self.assertEqual(ranked, [preds[1], preds[0], preds[2]])

    def test_ground_truth_sorted_by_score(self) -> None:
        views = annotated_views(
            read_eval_annotations_file()["images"][1]["views"],
        )
        scores = [view.score for view in rank_ground_truth(views)]
        self.assertEqual(scores, sorted(scores, reverse=True))


class TestAccKN(unittest.TestCase):
    def test_single_image_half_hit(self) -> None:
        gt = from_corners(CornerBox(0.0, 0.0, 1.0, 1.0))
        other = from_corners(CornerBox(0.5, 0.0, 1.5, 1.0))
        value = acc_k_n(
            {"x": [PredictedView(gt, 0.9), PredictedView(other, 0.5)]},
            {"x": [AnnotatedView(gt, 3.0)]},
            2,
            1,
            0.85,
        )
        self.assertAlmostEqual(value, 0.5)

    def test_fixture_values(self) -> None:
        annotations = _annotations()
        predictions = _predictions()
        for label, expected in EXPECTED_ACC.items():
            k_n, eps = label.split("@")
            k, n = (int(part) for part in k_n.split("/"))
            value = acc_k_n(predictions, annotations, k, n, float(eps))
            self.assertAlmostEqual(value, expected, delta=METRIC_TOLERANCE)

    def test_duplicate_hits_count_twice(self) -> None:
        gt = CompBox(0.5, 0.5, 0.4, 0.4)
        value = acc_k_n(
            {"x": [PredictedView(gt, 0.9), PredictedView(gt, 0.8)]},
            {"x": [AnnotatedView(gt, 3.0)]},
            2,
            1,
            0.9,
        )
        self.assertEqual(value, 1.0)

    def test_too_few_predictions(self) -> None:
        gt = CompBox(0.5, 0.5, 0.4, 0.4)
        with self.assertRaises(EvaluationError):
            acc_k_n(
                {"x": [PredictedView(gt, 0.9)]},
                {"x": [AnnotatedView(gt, 3.0)]},
                2,
                1,
                0.9,
            )

    def test_unknown_image(self) -> None:
        gt = CompBox(0.5, 0.5, 0.4, 0.4)
        with self.assertRaises(UnknownImageError):
            acc_k_n(
                {"y": [PredictedView(gt, 0.9)]},
                {"x": [AnnotatedView(gt, 3.0)]},
                1,
                1,
                0.9,
            )


class TestEvaluate(unittest.TestCase):
    def test_fixture_report(self) -> None:
        report = evaluate(_annotations(), _predictions(), MetricsConfig())
        self.assertEqual(report.image_count, 2)
        labels = {acc_key_label(key): v for key, v in report.acc.items()}
        self.assertEqual(set(labels), set(EXPECTED_ACC))
        for label, expected in EXPECTED_ACC.items():
            self.assertAlmostEqual(
                labels[label],
                expected,
                delta=METRIC_TOLERANCE,
            )
        self.assertAlmostEqual(
            report.mean_iou,
            EXPECTED_MEAN_IOU,
            delta=METRIC_TOLERANCE,
        )
        self.assertAlmostEqual(
            report.mean_disp,
            EXPECTED_MEAN_DISP,
            delta=METRIC_TOLERANCE,
        )
        self.assertEqual(report.short_gt_images, ("a", "b"))

    def test_thread_count_does_not_change_report(self) -> None:
        single = evaluate(
            _annotations(),
            _predictions(),
            MetricsConfig(),
            threads=1,
        )
        pooled = evaluate(
            _annotations(),
            _predictions(),
            MetricsConfig(),
            threads=4,
        )
        self.assertEqual(single, pooled)

    def test_cloned_predictions_are_perfect(self) -> None:
        doc = read_eval_annotations_file()
        doc["images"] = [img for img in doc["images"] if img["id"] == "a"]
        annotations = {
            image["id"]: annotated_views(image["views"])
            for image in doc["images"]
        }
        report = evaluate(
            annotations,
            _predictions(clone_predictions(doc)),
            MetricsConfig(k_values=(1, 5), n_values=(5, 10)),
        )
        self.assertTrue(all(value == 1.0 for value in report.acc.values()))
        self.assertEqual(report.mean_iou, 1.0)
        self.assertEqual(report.mean_disp, 0.0)

    def test_empty_prediction_set(self) -> None:
        with self.assertRaises(EvaluationError):
            evaluate(_annotations(), {}, MetricsConfig())

    def test_invalid_config(self) -> None:
        with self.assertRaises(ConfigurationError):
            MetricsConfig(k_values=(0,))
        with self.assertRaises(ConfigurationError):
            MetricsConfig(thresholds=(1.2,))
        with self.assertRaises(ConfigurationError):
            MetricsConfig(n_values=())

    def test_key_label(self) -> None:
        self.assertEqual(acc_key_label((5, 10, 0.9)), "5/10@0.9")


def _jittered(rng: np.random.Generator, box: CompBox) -> CompBox:
    return CompBox(
        box.cx + float(rng.normal(0.0, 0.05)),
        box.cy + float(rng.normal(0.0, 0.05)),
        box.w * float(rng.uniform(0.8, 1.25)),
        box.h * float(rng.uniform(0.8, 1.25)),
    )


def _random_evaluation_set(
    rng: np.random.Generator,
    images: int = 4,
) -> tuple[
    dict[str, list[AnnotatedView]],
    dict[str, list[PredictedView]],
]:
    """Annotations plus predictions scattered around them."""
    annotations: dict[str, list[AnnotatedView]] = {}
    predictions: dict[str, list[PredictedView]] = {}
    for index in range(images):
        image_id = f"img-{index}"
        gts = random_annotations(rng, int(rng.integers(1, 9)))
        confidences = rng.permutation(8) / 8 + 0.05
        preds = []
        for confidence in confidences[: int(rng.integers(5, 9))]:
            source = gts[int(rng.integers(0, len(gts)))].box
            preds.append(
                PredictedView(_jittered(rng, source), float(confidence)),
            )
        annotations[image_id] = gts
        predictions[image_id] = preds
    return annotations, predictions


class TestMetricProperties(unittest.TestCase):
    def test_disp_is_symmetric_and_translation_invariant(self) -> None:
        rng = np.random.default_rng(41)
        for _ in range(1000):
            a = random_box(rng)
            b = random_box(rng)
            self.assertEqual(disp(a, b), disp(b, a))
            dx, dy = (float(v) for v in rng.uniform(-2.0, 2.0, size=2))
            self.assertAlmostEqual(
                disp(a.translated(dx, dy), b.translated(dx, dy)),
                disp(a, b),
                places=12,
            )

    def test_acc_monotone_in_n_and_threshold(self) -> None:
        rng = np.random.default_rng(42)
        n_values = (1, 2, 3, 5, 8)
        thresholds = (0.3, 0.5, 0.7, 0.85, 0.9)
        for _ in range(100):
            annotations, predictions = _random_evaluation_set(rng)
            for k in (1, 3, 5):
                table = [
                    [
                        acc_k_n(predictions, annotations, k, n, eps)
                        for eps in thresholds
                    ]
                    for n in n_values
                ]
                for row in range(len(n_values)):
                    for col in range(len(thresholds)):
                        if row > 0:
                            self.assertGreaterEqual(
                                table[row][col],
                                table[row - 1][col],
                            )
                        if col > 0:
                            self.assertLessEqual(
                                table[row][col],
                                table[row][col - 1],
                            )

    def test_report_ignores_image_and_prediction_order(self) -> None:
        rng = np.random.default_rng(43)
        cfg = MetricsConfig(
            k_values=(1, 3),
            n_values=(2, 5),
            thresholds=(0.5, 0.85),
        )
        for _ in range(30):
            annotations, predictions = _random_evaluation_set(rng)
            base = evaluate(annotations, predictions, cfg)
            image_order = list(rng.permutation(list(predictions)))
            shuffled = {
                str(image_id): [
                    predictions[str(image_id)][int(i)]
                    for i in rng.permutation(len(predictions[str(image_id)]))
                ]
                for image_id in image_order
            }
            self.assertEqual(evaluate(annotations, shuffled, cfg), base)

    def test_report_ignores_order_of_tied_duplicates(self) -> None:
        rng = np.random.default_rng(44)
        cfg = MetricsConfig(k_values=(1, 3), n_values=(2,))
        for _ in range(30):
            annotations, predictions = _random_evaluation_set(rng, images=2)
            doubled = {
                image_id: [view for view in preds for _ in range(2)]
                for image_id, preds in predictions.items()
            }
            base = evaluate(annotations, doubled, cfg)
            reordered = {
                image_id: [
                    preds[int(i)] for i in rng.permutation(len(preds))
                ]
                for image_id, preds in doubled.items()
            }
            self.assertEqual(evaluate(annotations, reordered, cfg), base)

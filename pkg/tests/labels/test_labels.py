import unittest

import numpy as np

from tests.utils import random_annotations, random_box
from unickit.exceptions.local_exceptions import (
    ConfigurationError,
    InputDomainError,
    ShapeMismatchError,
)
from unickit.geometry import CompBox
from unickit.labels import (
    DEFAULT_EMA_DECAY,
    EmaState,
    LabelSchedule,
    LabelStrategy,
    QualityGuidanceConfig,
    ema_update,
    quality_guided_label,
    self_distilled_labels,
    smooth_labels,
    strategy_for_iteration,
)
from unickit.views import AnnotatedView

VIEWS = [
    AnnotatedView(CompBox(0.5, 0.5, 0.4, 0.4), 4.0),
    AnnotatedView(CompBox(1.5, 0.5, 0.4, 0.4), 2.0),
    AnnotatedView(CompBox(-1.0, -1.0, 0.4, 0.4), 5.0),
]
SCORE_RANGE = QualityGuidanceConfig(1.0, 5.0)


class TestQualityGuidance(unittest.TestCase):
    def test_best_overlap_score_is_mapped(self) -> None:
        label = quality_guided_label(
            CompBox(1.45, 0.5, 0.4, 0.4),
            VIEWS,
            SCORE_RANGE,
        )
        self.assertAlmostEqual(label, 0.25)

    def test_scores_outside_range_are_clipped(self) -> None:
        cfg = QualityGuidanceConfig(0.0, 3.0)
        label = quality_guided_label(CompBox(0.5, 0.5, 0.4, 0.4), VIEWS, cfg)
        self.assertEqual(label, 1.0)
        cfg = QualityGuidanceConfig(4.5, 6.0)
        label = quality_guided_label(CompBox(0.5, 0.5, 0.4, 0.4), VIEWS, cfg)
        self.assertEqual(label, 0.0)

    def test_ties_keep_the_first_view(self) -> None:
        # no overlap with any view: every IoU is 0
        label = quality_guided_label(
            CompBox(40.0, 40.0, 0.1, 0.1),
            VIEWS,
            SCORE_RANGE,
        )
        self.assertAlmostEqual(label, 0.75)

    def test_empty_annotations_rejected(self) -> None:
        with self.assertRaises(InputDomainError):
            quality_guided_label(CompBox(0.5, 0.5, 0.1, 0.1), [], SCORE_RANGE)

    def test_range_from_scores(self) -> None:
        cfg = QualityGuidanceConfig.from_scores(v.score for v in VIEWS)
        self.assertEqual((cfg.s_lo, cfg.s_hi), (2.0, 5.0))

    def test_degenerate_range_rejected(self) -> None:
        with self.assertRaises(ConfigurationError):
            QualityGuidanceConfig(3.0, 3.0)
        with self.assertRaises(ConfigurationError):
            QualityGuidanceConfig.from_scores([])


class TestEma(unittest.TestCase):
    def test_single_step(self) -> None:
        state = ema_update(EmaState([0.0], decay=0.9), [1.0])
        self.assertAlmostEqual(float(state.values[0]), 0.1)

    def test_fixed_point(self) -> None:
        values = np.array([0.25, -3.0, 7.5])
        state = ema_update(EmaState(values, decay=0.37), values)
        np.testing.assert_array_equal(state.values, values)

    def test_extreme_decays(self) -> None:
        frozen = ema_update(EmaState([1.0, 2.0], decay=1.0), [5.0, 6.0])
        np.testing.assert_array_equal(frozen.values, [1.0, 2.0])
        copied = ema_update(EmaState([1.0, 2.0], decay=0.0), [5.0, 6.0])
        np.testing.assert_array_equal(copied.values, [5.0, 6.0])

    def test_converges_to_constant_input(self) -> None:
        state = EmaState(np.zeros(3))
        self.assertEqual(state.decay, DEFAULT_EMA_DECAY)
        target = np.array([1.0, 2.0, 3.0])
        for _ in range(20_000):
            state = ema_update(state, target)
        np.testing.assert_allclose(state.values, target, atol=1e-6)

    def test_state_is_read_only(self) -> None:
        state = EmaState([1.0, 2.0])
        with self.assertRaises(ValueError):
            state.values[0] = 3.0

    def test_shape_mismatch(self) -> None:
        with self.assertRaises(ShapeMismatchError):
            ema_update(EmaState([0.0, 0.0]), [1.0])

    def test_decay_outside_unit_interval(self) -> None:
        with self.assertRaises(InputDomainError):
            EmaState([0.0], decay=1.5)


class TestSchedule(unittest.TestCase):
    def test_boundaries(self) -> None:
        sched = LabelSchedule(switch_iteration=10)
        self.assertIs(
            strategy_for_iteration(sched, 0),
            LabelStrategy.QUALITY_GUIDANCE,
        )
        self.assertIs(
            strategy_for_iteration(sched, 9),
            LabelStrategy.QUALITY_GUIDANCE,
        )
        self.assertIs(
            strategy_for_iteration(sched, 10),
            LabelStrategy.SELF_DISTILLATION,
        )

    def test_switch_at_zero_always_distills(self) -> None:
        self.assertIs(
            strategy_for_iteration(LabelSchedule(0), 0),
            LabelStrategy.SELF_DISTILLATION,
        )

    def test_negative_switch_rejected(self) -> None:
        with self.assertRaises(InputDomainError):
            LabelSchedule(-1)


class TestSmoothLabels(unittest.TestCase):
    BOXES = (
        CompBox(0.5, 0.5, 0.4, 0.4),
        CompBox(1.5, 0.5, 0.4, 0.4),
        CompBox(9.0, 9.0, 0.4, 0.4),
    )

    def test_quality_guidance_before_switch(self) -> None:
        labels = smooth_labels(
            iteration=3,
            schedule=LabelSchedule(5),
            pred_boxes=self.BOXES,
            unmatched=[1, 0, 1],
            annotated=VIEWS,
            quality_cfg=SCORE_RANGE,
        )
        self.assertEqual(sorted(labels), [0, 1])
        self.assertAlmostEqual(labels[0], 0.75)
        self.assertAlmostEqual(labels[1], 0.25)

    def test_self_distillation_after_switch(self) -> None:
        labels = smooth_labels(
            iteration=5,
            schedule=LabelSchedule(5),
            pred_boxes=self.BOXES,
            unmatched=[2],
            annotated=VIEWS,
            quality_cfg=SCORE_RANGE,
            teacher_confidences=[0.1, 0.2, 0.35],
        )
        self.assertEqual(labels, {2: 0.35})

    def test_self_distillation_needs_teacher(self) -> None:
        with self.assertRaises(ConfigurationError):
            smooth_labels(
                iteration=5,
                schedule=LabelSchedule(5),
                pred_boxes=self.BOXES,
                unmatched=[2],
                annotated=VIEWS,
                quality_cfg=SCORE_RANGE,
            )

    def test_bad_indices_rejected(self) -> None:
        with self.assertRaises(InputDomainError):
            self_distilled_labels([0.5, 0.5], [2])
        with self.assertRaises(InputDomainError):
            self_distilled_labels([0.5, 1.5], [1])
        with self.assertRaises(InputDomainError):
            smooth_labels(
                iteration=0,
                schedule=LabelSchedule(5),
                pred_boxes=self.BOXES,
                unmatched=[3],
                annotated=VIEWS,
                quality_cfg=SCORE_RANGE,
            )


class TestLabelProperties(unittest.TestCase):
    def test_ema_contracts_toward_current(self) -> None:
        rng = np.random.default_rng(51)
        for _ in range(100):
            size = int(rng.integers(1, 50))
            decay = float(rng.uniform(0.0, 1.0))
            state = EmaState(rng.normal(0.0, 10.0, size), decay=decay)
            current = rng.normal(0.0, 10.0, size)
            updated = ema_update(state, current)
            gap = np.abs(state.values - current)
            new_gap = np.abs(updated.values - current)
            slack = 1e-12 * np.maximum(1.0, np.abs(current))
            self.assertTrue(np.all(new_gap <= decay * gap + slack))

    def test_ema_fixed_point(self) -> None:
        rng = np.random.default_rng(52)
        for _ in range(100):
            values = rng.normal(0.0, 10.0, int(rng.integers(1, 50)))
            decay = float(rng.uniform(0.0, 1.0))
            updated = ema_update(EmaState(values, decay=decay), values)
            np.testing.assert_array_equal(updated.values, values)

    def test_quality_label_endpoints(self) -> None:
        rng = np.random.default_rng(53)
        for _ in range(100):
            views = random_annotations(rng, int(rng.integers(2, 8)))
            cfg = QualityGuidanceConfig.from_scores(v.score for v in views)
            lowest = min(views, key=lambda v: v.score)
            highest = max(views, key=lambda v: v.score)
            self.assertEqual(
                quality_guided_label(lowest.box, [lowest], cfg),
                0.0,
            )
            self.assertEqual(
                quality_guided_label(highest.box, [highest], cfg),
                1.0,
            )

    def test_quality_label_ignores_affine_rescaling(self) -> None:
        rng = np.random.default_rng(54)
        for _ in range(100):
            views = random_annotations(rng, int(rng.integers(1, 8)))
            scale = float(rng.uniform(0.1, 10.0))
            shift = float(rng.uniform(-5.0, 5.0))
            rescaled = [
                AnnotatedView(view.box, scale * view.score + shift)
                for view in views
            ]
            lo = float(rng.uniform(-1.0, 2.0))
            hi = lo + float(rng.uniform(0.5, 4.0))
            cfg = QualityGuidanceConfig(lo, hi)
            rescaled_cfg = QualityGuidanceConfig(
                scale * lo + shift,
                scale * hi + shift,
            )
            pred = random_box(rng)
            self.assertAlmostEqual(
                quality_guided_label(pred, rescaled, rescaled_cfg),
                quality_guided_label(pred, views, cfg),
                places=10,
            )

import itertools
import math
import unittest

import numpy as np

from tests.utils import (
    annotated_views,
    brute_force_assignment,
    predicted_views,
    random_annotations,
    random_predictions,
    read_fixture,
)
from unickit.exceptions.local_exceptions import (
    CapacityError,
    ShapeMismatchError,
)
from unickit.losses import LossWeights, focal_loss, pair_cost
from unickit.matching.assignment import assignment_cost, solve_rectangular
from unickit.matching.set_match import (
    DEFAULT_NUM_QUERIES,
    MatchAssignment,
    PaddedGtSlot,
    composite_loss,
    cost_matrix,
    optimal_assignment,
    pad_ground_truth,
    recompute_cost,
    unmatched_indices,
)


class TestPadGroundTruth(unittest.TestCase):
    def test_pads_with_empty_slots(self) -> None:
        gts = random_annotations(np.random.default_rng(1), 3)
        slots = pad_ground_truth(gts, 7)
        self.assertEqual(len(slots), 7)
        self.assertTrue(all(slot.is_valid for slot in slots[:3]))
        self.assertFalse(any(slot.is_valid for slot in slots[3:]))
        self.assertEqual(slots[0].box, gts[0].box)
        self.assertEqual(slots[0].quality, gts[0].score)
        self.assertEqual(slots[0].p, 1.0)
        self.assertEqual(slots[5], PaddedGtSlot.empty())

    def test_default_capacity(self) -> None:
        self.assertEqual(len(pad_ground_truth([])), DEFAULT_NUM_QUERIES)

    def test_exact_capacity(self) -> None:
        gts = random_annotations(np.random.default_rng(2), 4)
        self.assertEqual(len(pad_ground_truth(gts, 4)), 4)

    def test_too_many_views(self) -> None:
        gts = random_annotations(np.random.default_rng(3), 5)
        with self.assertRaises(CapacityError):
            pad_ground_truth(gts, 4)


class TestOptimalAssignment(unittest.TestCase):
    def test_perfect_predictions_cost_nothing(self) -> None:
        gt_doc = read_fixture("match_gt.json")
        pred_doc = read_fixture("match_pred.json")
        gts = annotated_views(gt_doc["images"][0]["views"])
        preds = predicted_views(pred_doc["images"][0]["views"])
        slots = pad_ground_truth(gts, len(preds))
        assignment = optimal_assignment(preds, slots, LossWeights())
        self.assertAlmostEqual(assignment.total_cost, 0.0)
        # empty slots are interchangeable, so the lowest indices win
        self.assertEqual(assignment.sigma, (3, 1, 4, 2, 0))
        self.assertEqual(unmatched_indices(slots, assignment), [0, 2])

    def test_matches_exhaustive_search(self) -> None:
        rng = np.random.default_rng(21)
        weights = LossWeights()
        for _ in range(1000):
            n = int(rng.integers(2, 8))
            preds = random_predictions(rng, n)
            gts = random_annotations(rng, int(rng.integers(0, n + 1)))
            slots = pad_ground_truth(gts, n)
            assignment = optimal_assignment(preds, slots, weights)
            cost = cost_matrix(preds, slots, weights)
            expected_sigma, best = brute_force_assignment(cost)
            self.assertEqual(assignment.total_cost, best)
            self.assertEqual(assignment.sigma, expected_sigma)

    def test_permuting_predictions_keeps_optimum(self) -> None:
        rng = np.random.default_rng(22)
        weights = LossWeights()
        preds = random_predictions(rng, 6)
        slots = pad_ground_truth(random_annotations(rng, 3), 6)
        base = optimal_assignment(preds, slots, weights).total_cost
        for _ in range(20):
            order = rng.permutation(6)
            shuffled = [preds[int(i)] for i in order]
            total = optimal_assignment(shuffled, slots, weights).total_cost
            self.assertAlmostEqual(total, base, places=9)

    def test_recompute_cost_matches(self) -> None:
        rng = np.random.default_rng(23)
        weights = LossWeights()
        preds = random_predictions(rng, 5)
        slots = pad_ground_truth(random_annotations(rng, 2), 5)
        assignment = optimal_assignment(preds, slots, weights)
        self.assertEqual(
            recompute_cost(preds, slots, assignment, weights),
            assignment.total_cost,
        )

    def test_restricted_problem_has_same_optimum(self) -> None:
        """
        Only valid slots carry information beyond the empty-slot cost.

        Subtracting each prediction's empty-slot cost leaves a
        rectangular problem over the valid slots alone.
        """
        rng = np.random.default_rng(24)
        weights = LossWeights()
        for _ in range(100):
            n = int(rng.integers(2, 8))
            preds = random_predictions(rng, n)
            gts = random_annotations(rng, int(rng.integers(1, n + 1)))
            slots = pad_ground_truth(gts, n)
            full = optimal_assignment(preds, slots, weights).total_cost
            empty = [
                pair_cost(pred, PaddedGtSlot.empty(), weights)
                for pred in preds
            ]
            reduced = np.array(
                [
                    [
                        pair_cost(pred, slots[g], weights) - empty[i]
                        for i, pred in enumerate(preds)
                    ]
                    for g in range(len(gts))
                ],
            )
            _, restricted = solve_rectangular(reduced)
            self.assertAlmostEqual(
                full,
                restricted + math.fsum(empty),
                delta=1e-9,
            )

    def test_size_mismatch_rejected(self) -> None:
        rng = np.random.default_rng(25)
        preds = random_predictions(rng, 3)
        slots = pad_ground_truth([], 4)
        with self.assertRaises(ShapeMismatchError):
            optimal_assignment(preds, slots, LossWeights())

    def test_assignment_must_be_permutation(self) -> None:
        with self.assertRaises(ShapeMismatchError):
            MatchAssignment(sigma=(0, 0, 1), total_cost=0.0)


class TestCompositeLoss(unittest.TestCase):
    def test_empty_slots_are_interchangeable(self) -> None:
        rng = np.random.default_rng(35)
        weights = LossWeights()
        for _ in range(20):
            n = int(rng.integers(3, 7))
            preds = random_predictions(rng, n)
            gts = random_annotations(rng, int(rng.integers(0, n - 1)))
            slots = pad_ground_truth(gts, n)
            assignment = optimal_assignment(preds, slots, weights)
            labels = {i: float(rng.uniform()) for i in range(n)}
            base = composite_loss(preds, slots, assignment, weights, labels)
            cost = cost_matrix(preds, slots, weights)
            empty = list(range(len(gts), n))
            for shuffled in itertools.permutations(empty):
                remap = dict(zip(empty, shuffled, strict=True))
                sigma = tuple(remap.get(s, s) for s in assignment.sigma)
                moved = MatchAssignment(
                    sigma=sigma,
                    total_cost=assignment.total_cost,
                )
                loss = composite_loss(preds, slots, moved, weights, labels)
                self.assertEqual(loss, base)
                self.assertEqual(
                    assignment_cost(cost, sigma),
                    assignment.total_cost,
                )

    def test_total_equals_matching_cost(self) -> None:
        rng = np.random.default_rng(31)
        weights = LossWeights()
        preds = random_predictions(rng, 6)
        slots = pad_ground_truth(random_annotations(rng, 4), 6)
        assignment = optimal_assignment(preds, slots, weights)
        loss = composite_loss(preds, slots, assignment, weights)
        self.assertAlmostEqual(loss.total, assignment.total_cost, places=9)

    def test_box_terms_only_from_valid_slots(self) -> None:
        rng = np.random.default_rng(32)
        weights = LossWeights()
        preds = random_predictions(rng, 4)
        slots = pad_ground_truth([], 4)
        assignment = optimal_assignment(preds, slots, weights)
        loss = composite_loss(preds, slots, assignment, weights)
        self.assertEqual(loss.reg, 0.0)
        self.assertEqual(loss.giou, 0.0)
        self.assertAlmostEqual(
            loss.focal,
            math.fsum(focal_loss(p.confidence, 0.0) for p in preds),
        )

    def test_soft_labels_apply_to_unmatched_only(self) -> None:
        rng = np.random.default_rng(33)
        weights = LossWeights()
        preds = random_predictions(rng, 5)
        slots = pad_ground_truth(random_annotations(rng, 2), 5)
        assignment = optimal_assignment(preds, slots, weights)
        unmatched = unmatched_indices(slots, assignment)
        matched = [i for i in range(5) if i not in unmatched]
        labels = {i: preds[i].confidence for i in range(5)}
        loss = composite_loss(preds, slots, assignment, weights, labels)
        expected_focal = math.fsum(
            focal_loss(preds[i].confidence, 1.0) for i in matched
        )
        # a label equal to the prediction contributes nothing
        self.assertAlmostEqual(loss.focal, expected_focal)

    def test_length_mismatch_rejected(self) -> None:
        rng = np.random.default_rng(34)
        preds = random_predictions(rng, 3)
        slots = pad_ground_truth([], 3)
        with self.assertRaises(ShapeMismatchError):
            composite_loss(
                preds,
                slots,
                MatchAssignment(sigma=(0, 1), total_cost=0.0),
                LossWeights(),
            )

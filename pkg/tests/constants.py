"""Shared constants for the test suite."""

# Hand-computed values for tests/fixtures/eval_*.json.
# Image "a": top-1 prediction overlaps its view after a 0.01 shift.
# Image "b": top-1 prediction overlaps its view after a 0.03 shift.
IOU_SHIFT_001 = 39 / 41
IOU_SHIFT_003 = 37 / 43
EXPECTED_ACC = {
    "1/5@0.85": 1.0,
    "1/5@0.9": 0.5,
    "1/10@0.85": 1.0,
    "1/10@0.9": 0.5,
    "5/5@0.85": 0.5,
    "5/5@0.9": 0.3,
    "5/10@0.85": 0.6,
    "5/10@0.9": 0.4,
}
EXPECTED_MEAN_IOU = (IOU_SHIFT_001 + IOU_SHIFT_003) / 2
EXPECTED_MEAN_DISP = 0.01

FOCAL_HALF = 0.173286795139986  # 0.25 * ln 2
METRIC_TOLERANCE = 1e-9

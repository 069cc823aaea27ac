from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from collections.abc import Sequence

EXIT_SCHEMA = 2
EXIT_REFERENCE = 3
EXIT_EVALUATION = 4
EXIT_GENERATION = 5
MAX_LISTED_VIOLATIONS = 20


class UnicKitError(Exception):
    """Base class for every error the command line maps to an exit code."""

    exit_code = EXIT_EVALUATION


class InvalidBoxError(UnicKitError, ValueError):
    """Exception raised when a box has non-positive or non-finite size."""

    exit_code = EXIT_SCHEMA

    def __init__(self, detail: str) -> None:
        """Initialize the exception string."""
        super().__init__(f"Invalid box: {detail}")


class InputDomainError(UnicKitError, ValueError):
    """Exception raised when a scalar argument is outside its domain."""

    exit_code = EXIT_SCHEMA

    def __init__(self, name: str, value: object, domain: str) -> None:
        """Initialize the exception string."""
        super().__init__(f"{name}={value!r} is outside {domain}")


class ConfigurationError(UnicKitError, ValueError):
    """Exception raised when flags, config keys or parameters are invalid."""

    exit_code = EXIT_SCHEMA

    def __init__(self, message: str) -> None:
        """Initialize the exception string."""
        super().__init__(f"Configuration error: {message}")


class InvalidDimensionsError(UnicKitError, ValueError):
    """Exception raised when image dimensions are not multiples of 32."""

    exit_code = EXIT_SCHEMA

    def __init__(self, height: int, width: int, stride: int) -> None:
        """Initialize the exception string."""
        super().__init__(
            f"Image dimensions {height}x{width} must be positive "
            f"multiples of {stride}",
        )


class FeatureGridMismatchError(UnicKitError, ValueError):
    """Exception raised when a feature file disagrees with the image size."""

    exit_code = EXIT_SCHEMA

    def __init__(
        self,
        grid: tuple[int, int],
        pixels: tuple[int, int],
        expected: tuple[int, int],
    ) -> None:
        """Initialize the exception string."""
        super().__init__(
            f"Feature file grid is {grid[0]}x{grid[1]}, "
            f"{pixels[0]}x{pixels[1]} pixels imply "
            f"{expected[0]}x{expected[1]}",
        )


class SchemaError(UnicKitError):
    """Exception raised when an input file violates its schema."""

    exit_code = EXIT_SCHEMA

    def __init__(self, source: str, violations: Sequence[str]) -> None:
        """Initialize the exception string."""
        self.source = source
        self.violations = list(violations)
        listed = "; ".join(self.violations[:MAX_LISTED_VIOLATIONS])
        hidden = len(self.violations) - MAX_LISTED_VIOLATIONS
        suffix = f" (+{hidden} more)" if hidden > 0 else ""
        super().__init__(f"Schema error in {source}: {listed}{suffix}")


class UnknownImageError(UnicKitError):
    """Exception raised when a prediction refers to an unannotated image."""

    exit_code = EXIT_REFERENCE

    def __init__(self, image_id: str) -> None:
        """Initialize the exception string."""
        self.image_id = image_id
        super().__init__(f"Unknown image id '{image_id}' in predictions")


class EvaluationError(UnicKitError):
    """Exception raised when metrics cannot be computed for the inputs."""

    exit_code = EXIT_EVALUATION

    def __init__(self, message: str) -> None:
        """Initialize the exception string."""
        super().__init__(f"Evaluation error: {message}")


class CapacityError(UnicKitError):
    """Exception raised when N is smaller than the ground-truth count."""

    exit_code = EXIT_EVALUATION

    def __init__(self, capacity: int, required: int) -> None:
        """Initialize the exception string."""
        super().__init__(
            f"Cannot pad {required} ground-truth views into {capacity} slots",
        )


class ShapeMismatchError(UnicKitError, ValueError):
    """Exception raised when operand sizes or shapes disagree."""

    exit_code = EXIT_EVALUATION

    def __init__(self, message: str) -> None:
        """Initialize the exception string."""
        super().__init__(f"Shape mismatch: {message}")


class NumericError(UnicKitError, ArithmeticError):
    """Exception raised when a cost or activation is not finite."""

    exit_code = EXIT_EVALUATION

    def __init__(self, message: str) -> None:
        """Initialize the exception string."""
        super().__init__(f"Numeric error: {message}")


class GenerationFailureError(UnicKitError):
    """Exception raised when no admissible initial view was found."""

    exit_code = EXIT_GENERATION

    def __init__(self, image_id: str, attempts: int) -> None:
        """Initialize the exception string."""
        self.image_id = image_id
        super().__init__(
            f"No admissible initial view for image '{image_id}' "
            f"after {attempts} attempts",
        )


class NotUnboundedError(UnicKitError):
    """Exception raised when every GT view lies inside the initial view."""

    exit_code = EXIT_GENERATION

    def __init__(self, image_id: str) -> None:
        """Initialize the exception string."""
        self.image_id = image_id
        super().__init__(
            f"Sample for image '{image_id}' has no ground-truth view "
            "outside the initial view",
        )


class NoSamplesGeneratedError(UnicKitError):
    """Exception raised when a generation run produced nothing."""

    exit_code = EXIT_GENERATION

    def __init__(self, skipped: int) -> None:
        """Initialize the exception string."""
        super().__init__(
            f"No samples could be generated ({skipped} images skipped)",
        )

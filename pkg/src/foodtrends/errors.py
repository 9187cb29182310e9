"""Exception hierarchy shared across the pipeline.

The CLI maps these onto exit codes: ValidationError (and subclasses) -> 1,
everything else raised here (storage, provider, file format) -> 2.
"""


class FoodTrendsError(Exception):
    """Base class for all pipeline errors."""


class ValidationError(FoodTrendsError):
    """Invalid input data, configuration, or arguments."""


class ShortfallError(ValidationError):
    """A dataset builder could not meet its target size."""

    def __init__(self, side: str, available: int, needed: int):
        self.side = side
        self.available = available
        self.needed = needed
        super().__init__(
            f"{side} side has only {available} surviving candidates, "
            f"need {needed}"
        )


class StorageError(FoodTrendsError):
    """Corpus store I/O failure; message names the failing path."""


class ProviderError(FoodTrendsError):
    """Post provider call failed (after retries, where applicable)."""


class FormatError(FoodTrendsError):
    """Binary feature/head file does not conform to its wire format."""

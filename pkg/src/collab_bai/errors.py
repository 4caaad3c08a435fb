class UsageError(ValueError):
    """Bad arguments supplied by the caller (CLI exit code 2)."""


class InstanceError(UsageError):
    """An arm instance violates its invariants (range, unique maximum)."""


class GeneratorError(RuntimeError):
    """A random instance generator gave up (e.g. tie re-draw budget exhausted)."""


class TranscriptError(ValueError):
    """A transcript is structurally malformed."""


class NotFound(RuntimeError):
    """A budget search never reached the target error below its ceiling."""

    def __init__(self, ceiling: int, message: str | None = None):
        self.ceiling = ceiling
        super().__init__(message or f"target error not reached below T={ceiling}")

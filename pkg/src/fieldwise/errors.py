"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: data/format problems exit 2,
numeric failures exit 3 (usage errors exit 1 before any of these fire).
"""


class FieldwiseError(Exception):
    """Base class for every error raised by this package."""


class ParseError(FieldwiseError):
    """A text input (example line, schema file, request) violates the format."""


class FormatError(FieldwiseError):
    """A binary artifact (model file, quantized blob, patch) is malformed."""


class StaleBaseError(FieldwiseError):
    """A patch was applied to bytes that are not its recorded source."""


class StaleCacheError(FieldwiseError):
    """A context cache was used after the weights it was built from changed."""


class CorruptionError(FieldwiseError):
    """A patched output failed its mandatory target-digest verification."""


class ContractError(FieldwiseError):
    """The caller violated a documented precondition."""


class SizingError(FieldwiseError):
    """Requested model dimensions exceed the configured memory cap."""


class NumericError(FieldwiseError):
    """A non-finite value was produced; ``block`` names the producer."""

    def __init__(self, message: str, block: str | None = None):
        super().__init__(message)
        self.block = block


class TrainAborted(FieldwiseError):
    """Training stopped early on an I/O failure; carries the partial report."""

    def __init__(self, message: str, partial_report=None):
        super().__init__(message)
        self.partial_report = partial_report


class HogwildWorkerError(FieldwiseError):
    """A training worker raised; ``worker_id`` identifies it."""

    def __init__(self, message: str, worker_id: int):
        super().__init__(message)
        self.worker_id = worker_id

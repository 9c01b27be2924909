"""Exception taxonomy shared by all mfpod modules.

The CLI maps these onto process exit codes: validation-type failures
exit 2, numerical failures exit 3, data-coverage failures exit 4.
"""


class MfpodError(Exception):
    """Base class for all mfpod errors."""


class ValidationError(MfpodError):
    """Invalid configuration, parameters, shapes, or malformed inputs."""


class ShapeError(ValidationError):
    """Array dimensions incompatible with the requested operation."""


class DataError(ValidationError):
    """Payload contains non-finite or otherwise unusable values."""


class AlignmentError(ValidationError):
    """Paired series disagree in times, parameters, or column ordering."""


class ExtrapolationError(ValidationError):
    """Requested interpolation points fall outside the source span."""


class StorageError(MfpodError):
    """File I/O failure while persisting or loading an artifact."""


class FormatError(StorageError):
    """Bad magic, version, or truncated payload in a binary artifact."""


class InstabilityError(MfpodError):
    """A solver produced non-finite values; message names the step."""


class TrainingError(MfpodError):
    """Optimization diverged or training inputs were unusable."""


class CoverageError(MfpodError):
    """Reference data does not cover the requested test set."""

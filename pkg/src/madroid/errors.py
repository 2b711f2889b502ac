"""Exception hierarchy shared by all stages."""


class MadroidError(Exception):
    """Base class for every error raised by this package."""


class InputError(MadroidError):
    """Unreadable or unparseable input."""


class EmptyCaptureError(InputError):
    """A capture log contained no parseable message."""


class StructureError(InputError):
    """A view tree violates its structural invariants (duplicate ids, cycles)."""


class NotFoundError(MadroidError):
    pass


class ConfigurationError(MadroidError):
    pass


class ContractError(MadroidError):
    """An operation was called outside its precondition."""


class ServiceError(MadroidError):
    """An external service stayed unavailable after retries."""


class RateLimitError(ServiceError):
    def __init__(self, message, retry_after=None):
        super().__init__(message)
        self.retry_after = retry_after


class ValidationError(ServiceError):
    """An external service answered with an out-of-contract value."""


EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2
EXIT_NONCONVERGED = 3
EXIT_DETECTOR_FAILURE = 4


class StageError(MadroidError):
    """A pipeline stage failed; carries the stage name, cause and exit code."""

    def __init__(self, stage, cause, exit_code=EXIT_INPUT):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = exit_code

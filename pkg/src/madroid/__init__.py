"""Ad traffic classification, ad content extraction and devious ad content
detection over recorded Android app captures."""

from .errors import (
    ConfigurationError,
    ContractError,
    EmptyCaptureError,
    InputError,
    MadroidError,
    NotFoundError,
    RateLimitError,
    ServiceError,
    StageError,
    StructureError,
    ValidationError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "ContractError",
    "EmptyCaptureError",
    "InputError",
    "MadroidError",
    "NotFoundError",
    "RateLimitError",
    "ServiceError",
    "StageError",
    "StructureError",
    "ValidationError",
    "__version__",
]

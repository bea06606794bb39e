"""Exception hierarchy.

Every error raised on bad input is also a ``ValueError`` so callers that
only care about "bad argument" can catch that.
"""


class AsymVerifyError(Exception):
    """Base class for all package errors."""


class CapExceededError(AsymVerifyError, ValueError):
    """Requested more tokens than the model's ``max_output``."""


class InvalidPartitionError(AsymVerifyError, ValueError):
    pass


class PayloadSizeError(AsymVerifyError, ValueError):
    pass


class SpanRangeError(AsymVerifyError, ValueError):
    pass


class UnreachableTargetError(AsymVerifyError, ValueError):
    pass


class ConfigurationError(AsymVerifyError, ValueError):
    """Parameters and claim (or CLI options) do not fit together."""


class UnderdeterminedFitError(AsymVerifyError, ValueError):
    pass


class SchemaError(AsymVerifyError, ValueError):
    """A serialized record failed validation."""

"""Exception hierarchy shared across the package."""


class HotplugError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(HotplugError, ValueError):
    """Invalid parameter combination supplied by the caller."""


class ModulusMismatch(ConfigurationError):
    """Two field values with different moduli were combined."""


class DivisionByZero(HotplugError, ZeroDivisionError):
    """Division by the zero element of a finite field."""


class FieldTooSmall(ConfigurationError):
    """The field does not have enough distinct evaluation nodes."""


class UnsupportedParams(ConfigurationError):
    """A scheme was asked to run outside its supported parameter range."""


class SubpacketizationTooLarge(ConfigurationError):
    """Requested subpacketization violates the scheme's feasibility bound."""


class EnumerationGuardExceeded(ConfigurationError):
    """An exhaustive check was rejected because it would be too large."""


class ReconstructionFailure(HotplugError):
    """No sign assignment makes the omitted multicast messages redundant."""


class DecodeFailure(HotplugError):
    """A user could not recover its demanded file (verification error)."""


class DecodingVectorNotFound(HotplugError):
    """No decoding vector satisfies the span and rank conditions."""


class PhiNotFound(DecodingVectorNotFound):
    """No delivery vector passes the full-rank filter for some user."""


class InfeasibleXi(HotplugError):
    """Could not pick enough independent extra key rows (should not happen)."""


class ConditionViolated(HotplugError):
    """A placement-time decodability condition failed."""

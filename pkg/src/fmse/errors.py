"""Exception hierarchy. Every error carries a stable ``code`` string."""


class FmseError(Exception):
    """Base class for all errors raised by this package."""

    code = "ERROR"

    def __init__(self, message="", **context):
        super().__init__(message or self.code)
        self.context = context


# --- container codec ---

class BadMagicError(FmseError):
    code = "BAD_MAGIC"


class UnsupportedMajorVersionError(FmseError):
    code = "UNSUPPORTED_MAJOR_VERSION"


class MetaChecksumError(FmseError):
    code = "META_CHECKSUM_MISMATCH"


class TruncatedFileError(FmseError):
    code = "TRUNCATED"


class ChecksumMismatchError(FmseError):
    code = "CHECKSUM_MISMATCH"

    def __init__(self, message="", frame_index=None, sensor=None, **context):
        super().__init__(message, **context)
        self.frame_index = frame_index
        self.sensor = sensor


class RegistryViolationError(FmseError):
    code = "REGISTRY_VIOLATION"


class OrderViolationError(FmseError):
    code = "ORDER_VIOLATION"


class IoFailureError(FmseError):
    code = "IO_FAILURE"


class OutOfRangeError(FmseError):
    code = "OUT_OF_RANGE"


class NotSeekableError(FmseError):
    code = "NOT_SEEKABLE"


# --- calibration graph ---

class NonIdentityRootError(FmseError):
    code = "NON_IDENTITY_ROOT"


class UnregisteredSensorError(FmseError):
    code = "UNREGISTERED_SENSOR"


class CrossAgentError(FmseError):
    code = "CROSS_AGENT"


class MissingRootError(FmseError):
    code = "MISSING_ROOT"


# --- frame assembly ---

class UnsortedInputError(FmseError):
    code = "UNSORTED_INPUT"


class InsufficientSamplesError(FmseError):
    code = "INSUFFICIENT_SAMPLES"


# --- geometry tools ---

class NoConvergenceError(FmseError):
    code = "NO_CONVERGENCE"


class DimensionMismatchError(FmseError):
    code = "DIMENSION_MISMATCH"


class EmptyInputError(FmseError):
    code = "EMPTY_INPUT"


class DegenerateGeometryError(FmseError):
    code = "DEGENERATE"


# --- bag export ---

class UnmappedSensorError(FmseError):
    code = "UNMAPPED_SENSOR"


class UnsupportedEncodingError(FmseError):
    code = "UNSUPPORTED_ENCODING"

"""Error taxonomy and the process exit codes the CLI maps them to."""

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4


class WarmupError(Exception):
    """Base class for every error raised by this package."""

    kind = "error"
    exit_code = 1


class ConfigError(WarmupError):
    """Invalid configuration supplied by the caller."""

    kind = "config"
    exit_code = EXIT_CONFIG


class ArgumentError(ConfigError, ValueError):
    """Invalid argument passed to a library function."""


class DataError(WarmupError):
    """A file or stream could not be read, written, or validated."""

    kind = "io"
    exit_code = EXIT_IO


class FormatError(DataError):
    """Byte layout or record syntax does not match the documented format."""


class TruncatedError(DataError):
    """Stream ended before the declared payload was complete."""


class ValidationError(DataError):
    """Content-level checks failed (non-finite values, duplicate ids, ...)."""


class NumericError(WarmupError):
    """A numerical routine could not produce a trustworthy result."""

    kind = "numeric"
    exit_code = EXIT_NUMERIC


class DegenerateInputError(NumericError):
    """Input carries no usable signal (e.g. zero variance)."""


class ConvergenceError(NumericError):
    """Iteration budget exhausted before reaching the requested tolerance."""


class TargetRangeError(NumericError, ValueError):
    """Requested effective size lies outside the feasible interval."""

"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration / data problems exit 2,
plain I/O failures exit 1.
"""


class RespSweepError(Exception):
    """Base class for errors raised by this package."""


class DecodeError(RespSweepError):
    """A WAV container is malformed; the message names the offending chunk."""


class UnsupportedFormatError(DecodeError):
    """The WAV container is valid but uses an encoding we do not decode."""


class EmptyAudioError(DecodeError):
    """The WAV file carries a zero-length data chunk."""


class InsufficientDurationError(RespSweepError):
    """A clip is shorter than a requested analysis window.

    Carries the available and requested durations in seconds so callers
    can report exactly how far short the recording falls.
    """

    def __init__(self, message, available_seconds=None, requested_seconds=None):
        super().__init__(message)
        self.available_seconds = available_seconds
        self.requested_seconds = requested_seconds


class ManifestError(RespSweepError):
    """A dataset manifest failed to parse; includes the 1-based line number."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class ConfigError(RespSweepError):
    """An analysis configuration violates its invariants."""


class DegenerateFilterbankError(ConfigError):
    """The requested mel band is too narrow for the FFT resolution."""

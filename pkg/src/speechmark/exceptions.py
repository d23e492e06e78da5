"""Exception hierarchy shared by all speechmark modules."""


class SpeechmarkError(Exception):
    """Base class for every error raised by this package."""


# audio I/O
class NotWav(SpeechmarkError):
    pass


class UnsupportedFormat(SpeechmarkError):
    pass


class IoFailure(SpeechmarkError, OSError):
    pass


class BadSampleRate(SpeechmarkError, ValueError):
    pass


# analysis / signal contracts
class FrameTooShort(SpeechmarkError, ValueError):
    pass


class SingularAutocorrelation(SpeechmarkError, ValueError):
    pass


class LengthMismatch(SpeechmarkError, ValueError):
    pass


class WindowTooSmall(SpeechmarkError, ValueError):
    pass


class TimestampOverflow(SpeechmarkError, ValueError):
    pass


class WrongLength(SpeechmarkError, ValueError):
    pass


class TooShort(SpeechmarkError, ValueError):
    pass


class OutOfBounds(SpeechmarkError, ValueError):
    pass


class RateMismatch(SpeechmarkError, ValueError):
    pass


class SilentSignal(SpeechmarkError, ValueError):
    pass


class NoActiveBlocks(SpeechmarkError, ValueError):
    pass


class EmptyResult(SpeechmarkError, ValueError):
    pass


class ConfigError(SpeechmarkError, ValueError):
    """An EmbedConfig field is outside its allowed range."""

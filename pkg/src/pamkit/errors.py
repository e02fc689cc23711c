"""Exception hierarchy shared by every pamkit module."""


class PamkitError(Exception):
    """Base class for all errors raised by pamkit."""


# audio
class NotRiff(PamkitError):
    pass


class UnsupportedEncoding(PamkitError):
    pass


class MultichannelRejected(PamkitError):
    pass


class TruncatedData(PamkitError):
    pass


class OutOfRange(PamkitError):
    pass


class IoFailure(PamkitError):
    pass


# dsp
class NonPowerOfTwoLength(PamkitError):
    pass


class ClipTooShort(PamkitError):
    pass


class EmptyClip(PamkitError):
    pass


class BandTooNarrow(PamkitError):
    pass


class EmptyInput(PamkitError):
    pass


# detect
class BandOutOfRange(PamkitError):
    pass


class FeatureConfigMismatch(PamkitError):
    pass


# learn
class MixedVectorLengths(PamkitError):
    pass


class EmptyDataset(PamkitError):
    pass


class ClassTooSmall(PamkitError):
    pass


class DegenerateClass(PamkitError):
    pass


class NotBinary(PamkitError):
    pass


class SingularCovariance(PamkitError):
    pass


class TooManyComponents(PamkitError):
    pass


class LengthMismatch(PamkitError):
    pass


class ClassMismatch(PamkitError):
    pass


class SchemaVersionMismatch(PamkitError):
    pass


class CorruptModel(PamkitError):
    pass


# eval
class UnsortedInput(PamkitError):
    pass


# spatial
class NoSites(PamkitError):
    pass


class UnknownSource(PamkitError):
    pass


# render
class EmptySpectrogram(PamkitError):
    pass


class EventOutOfRange(PamkitError):
    pass


class MalformedCsv(PamkitError):
    """A CSV input could not be parsed; ``line`` is 1-based."""

    def __init__(self, path, line, reason):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = path
        self.line = line
        self.reason = reason

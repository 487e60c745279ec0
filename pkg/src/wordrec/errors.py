"""Exception types raised across the pipeline."""


class WordrecError(Exception):
    """Base class for all errors raised by this package."""


# audio-io
class UnsupportedFormat(WordrecError):
    """WAV file is readable but not 16-bit mono PCM at 16 kHz."""


class CorruptFile(WordrecError):
    """File is not a well-formed RIFF/WAVE container."""


class BadHeader(WordrecError):
    """Manifest CSV header does not match the required schema."""


class UnknownSplit(WordrecError):
    """Manifest row has a split other than train/test."""


class UnknownWord(WordrecError):
    """Manifest row has a word outside the configured vocabulary."""


class MissingFile(WordrecError):
    """Manifest row references an audio file that does not exist."""


class ImbalancedDataset(WordrecError):
    """Per-accent word counts are unequal within a split."""


# dsp
class EmptySignal(WordrecError):
    pass


class SignalTooShort(WordrecError):
    pass


class FrameTooLong(WordrecError):
    pass


# melbank
class NegativeFrequency(WordrecError):
    pass


class NegativeMel(WordrecError):
    pass


class InvalidRange(WordrecError):
    """Filterbank frequency range is empty or exceeds Nyquist."""


class TooFewFilters(WordrecError):
    """Filterbank needs at least two filters."""


class TooFewBins(WordrecError):
    """A filter band is too narrow to contain an FFT bin."""


# features
class DimensionMismatch(WordrecError):
    pass


class TooManyCoefficients(WordrecError):
    pass


class BadMagic(WordrecError):
    """Binary file does not start with the expected magic bytes."""


class ShapeMismatch(WordrecError):
    """Declared shape disagrees with the payload or the consumer."""


# noise
class SilentClean(WordrecError):
    pass


class SilentNoise(WordrecError):
    pass


# cnn
class EmptyDataset(WordrecError):
    pass

"""Exception types raised across the toolkit.

Every error carries its class name into CLI output, so names are part of
the public surface and should not be renamed casually.
"""


class AsrForgeError(Exception):
    """Base class for all toolkit errors."""


# audio
class UnsupportedEncoding(AsrForgeError, ValueError):
    pass


class MalformedContainer(AsrForgeError, ValueError):
    pass


class EmptyAudio(AsrForgeError, ValueError):
    pass


class IoFailure(AsrForgeError, OSError):
    pass


# vad
class BufferTooShort(AsrForgeError, ValueError):
    pass


class MalformedFile(AsrForgeError, ValueError):
    pass


class OutOfRangeProbability(AsrForgeError, ValueError):
    pass


# bpe
class EmptyCorpus(AsrForgeError, ValueError):
    pass


class VocabTooSmall(AsrForgeError, ValueError):
    pass


class InvalidIndex(AsrForgeError, IndexError):
    pass


# ctc
class Infeasible(AsrForgeError, ValueError):
    pass


class DimensionMismatch(AsrForgeError, ValueError):
    pass


# corpus
class MissingTranscript(AsrForgeError, FileNotFoundError):
    pass


class UnreadableAudio(AsrForgeError, ValueError):
    pass


class InsufficientData(AsrForgeError, ValueError):
    pass


class MissingHypothesis(AsrForgeError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class LangProfileMismatch(AsrForgeError, ValueError):
    pass

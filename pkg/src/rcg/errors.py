"""Exception types shared across the toolkit."""


class RcgError(Exception):
    """Base class for every error raised by this package."""


# dataset loading / statistics

class DuplicateId(RcgError):
    pass


class MalformedRecord(RcgError):
    pass


class AlignmentError(RcgError):
    pass


class EmptyCorpus(RcgError):
    pass


class InvalidThresholds(RcgError):
    pass


# encoders

class DimensionMismatch(RcgError):
    pass


class MissingVector(RcgError):
    pass


class FreeTextUnsupported(RcgError):
    """Raised when an id-keyed encoder is asked to embed arbitrary text."""


class ProtocolViolation(RcgError):
    """A remote backend answered, but not in the agreed shape."""


class BackendUnavailable(RcgError):
    """A remote backend could not serve the request at all."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class EncoderUnavailable(BackendUnavailable):
    pass


class GeneratorUnavailable(BackendUnavailable):
    pass


# retrieval

class EncoderMismatch(RcgError):
    """Query and database embeddings come from different encoders."""


class ZeroQuery(RcgError):
    """The query embedding has zero norm; ranking by inner product is undefined."""


# prompts

class InvalidBudget(RcgError):
    pass


# generation

class NoExemplar(RcgError):
    pass


# evaluation

class EmptyReference(RcgError):
    pass


class EmptyInput(RcgError):
    pass


# orchestration

class ConfigError(RcgError):
    pass

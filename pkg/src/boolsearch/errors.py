"""Exception types shared across the package."""


class BoolSearchError(Exception):
    """Base class for all errors raised by this package."""


class CorpusFormatError(BoolSearchError):
    """Corpus file is malformed (bad record, duplicate id, empty field)."""


class JudgmentFormatError(BoolSearchError):
    """Judgment record violates the schema or a labeling invariant."""


class EmbeddingError(BoolSearchError):
    """Embedding failed, either locally or at the remote service."""


class EmbeddingServiceError(EmbeddingError):
    """Remote embedding service returned an error or unusable payload."""


class IndexFormatError(BoolSearchError):
    """Index file has a bad magic header, version, or inconsistent layout."""


class QuerySyntaxError(BoolSearchError):
    """Boolean query text failed to parse.

    ``offset`` is the byte offset of the offending character in the
    UTF-8 encoding of the query string.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class DecompositionError(BoolSearchError):
    """Question decomposition produced no parseable expression."""


class ChatError(BoolSearchError):
    """Chat completion transport failed or is misconfigured."""


class RunFormatError(BoolSearchError):
    """Retrieval run file is malformed or inconsistent with the eval k."""


class GenerationError(BoolSearchError):
    """Dataset generation pipeline hit an unrecoverable condition."""

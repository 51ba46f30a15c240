"""Exception hierarchy shared by all ffrank modules."""


class FfrankError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(FfrankError):
    """Vector or matrix dimensions do not match."""


class ZeroVectorError(FfrankError):
    """Operation undefined for the zero vector (norm == 0)."""


class EmptyInputError(FfrankError):
    """A nonempty collection was required."""


class DomainError(FfrankError):
    """Scalar parameter outside its valid domain."""


class MissingDocumentError(FfrankError, KeyError):
    """Document ID not present in the forward index."""

    def __init__(self, doc_id: str):
        super().__init__(f"document not in index: {doc_id!r}")
        self.doc_id = doc_id

    def __str__(self) -> str:  # KeyError would repr() the message
        return self.args[0]


class DuplicateDocumentError(FfrankError):
    """Document ID already present in the forward index."""


class FormatError(FfrankError):
    """Malformed input file.

    ``offset`` is the byte offset (binary inputs) or ``line`` the
    1-based line number (text inputs) where parsing failed, when known.
    """

    def __init__(self, message: str, *, offset: int | None = None, line: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        elif line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.offset = offset
        self.line = line


class VersionError(FfrankError):
    """Index file has an unsupported format version."""


class EmptyQueryError(FfrankError):
    """No query tokens could be resolved to embeddings."""


class UnknownTokenError(FfrankError):
    """Token has no embedding and the table policy is 'error'."""

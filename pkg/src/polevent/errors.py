"""Exception hierarchy shared across the package.

Remote failures (anything reachable only over the wire) subclass
RemoteError so callers can classify transport problems with a single
except clause; the CLI maps that class to its own exit code.
"""

from __future__ import annotations


class PolEventError(Exception):
    """Base class for all errors raised by this package."""


class CorpusIOError(PolEventError):
    """Corpus stream or file could not be read."""


class EmptyCorpusError(PolEventError):
    """No usable records survived parsing or filtering."""


class EmptyTextError(PolEventError):
    """Text produced zero tokens and cannot be embedded."""


class DimMismatchError(PolEventError):
    """Vector dimensions disagree."""


class RemoteError(PolEventError):
    """Base for failures talking to a remote endpoint."""


class TransportError(RemoteError):
    """Connection-level failure, or retry budget exhausted."""


class EndpointError(RemoteError):
    """Endpoint answered with a non-success HTTP status."""

    def __init__(self, status: int, detail: str = ""):
        self.status = status
        self.detail = detail
        super().__init__(f"endpoint returned HTTP {status}" + (f": {detail}" if detail else ""))


class ProtocolError(RemoteError):
    """Endpoint answered 2xx but the payload violates the wire contract."""


class RequestTimeoutError(RemoteError, TimeoutError):
    """The remote call exceeded its configured timeout."""


class IndexFormatError(PolEventError):
    """Index file is truncated, corrupted, or not an index file."""


class PromptBudgetError(PolEventError):
    """Not even one retrieved context fits the prompt character budget."""


class EventParseError(PolEventError):
    """No JSON payload could be located in the model output."""

    def __init__(self, message: str, raw_text: str):
        self.raw_text = raw_text
        super().__init__(message)


class QueryOnEmptyIndexError(PolEventError):
    """A query was issued against an index with no entries."""


class EmbedderMismatchError(PolEventError):
    """Index was built with a different embedder kind or dimension."""


class AlignmentError(PolEventError):
    """A gold question has no corresponding answer."""


class GoldFormatError(PolEventError):
    """Gold set file violates the expected schema."""


class ConfigError(PolEventError):
    """Configuration file is malformed or holds disallowed values."""

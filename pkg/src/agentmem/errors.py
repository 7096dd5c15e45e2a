"""Exception hierarchy shared across the engine."""


class AgentMemError(Exception):
    """Base class for all engine errors."""


class ValidationError(AgentMemError):
    """Input violates a documented precondition or invariant."""


class NotFoundError(AgentMemError):
    """A referenced entry, fact, or document does not exist."""


class StorageError(AgentMemError):
    """The filesystem refused a read or write."""


class ServiceError(AgentMemError):
    """An external HTTP service (reader/embedder/extractor) failed."""

"""Exception types shared across the gateway."""


class LeanServeError(Exception):
    """Base class for all gateway errors."""


class MalformedReply(LeanServeError):
    """A worker emitted bytes that do not decode to a reply document.

    Callers treat this the same as a worker crash.
    """


class MalformedTree(LeanServeError):
    """An infotree document is missing required fields or is not a tree."""


class SpanOutOfBounds(LeanServeError):
    """A tactic span points outside the proof body it was extracted from."""


class SpawnFailure(LeanServeError):
    """The checker executable could not be started or never became ready."""


class WarmFailure(LeanServeError):
    """Importing a header produced error diagnostics."""

    def __init__(self, message, reply=None):
        super().__init__(message)
        self.reply = reply


class TimeoutExceeded(LeanServeError):
    """A job missed its execution deadline."""


class QueueTimeout(TimeoutExceeded):
    """A job expired while waiting for an idle worker."""


class WorkerCrashed(LeanServeError):
    """The worker process died or broke the wire protocol mid-command."""


class DuplicateRelease(LeanServeError):
    """A worker was released into the warm cache twice without a claim."""


class CorpusError(LeanServeError):
    """A benchmark corpus file could not be parsed."""

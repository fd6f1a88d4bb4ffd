"""Exception types shared across the toolkit.

User-facing commands map ConvRecError to exit code 1; anything else is an
internal error (exit code 2).
"""


class ConvRecError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ConvRecError):
    """Bad configuration: missing file, parse failure, unknown or missing key."""


class CorpusError(ConvRecError):
    """Unified corpus violates its schema or invariants."""


class IntegrityError(CorpusError):
    """Checksum mismatch for a corpus file."""


class IngestError(ConvRecError):
    """Raw dataset could not be converted."""


class BatchError(ConvRecError):
    """Invalid batching request (e.g. empty instance list)."""


class ModelError(ConvRecError):
    """Model construction or forward contract violation."""


class EvalError(ConvRecError):
    """Metric computation received unusable inputs."""


class CheckpointError(ConvRecError):
    """Artifact blob is corrupt or inconsistent with its manifest."""


class SessionError(ConvRecError):
    """Interaction session misuse (unknown, closed, or stale-turn)."""

    def __init__(self, message: str, code: str = "session_error", details: dict | None = None):
        super().__init__(message)
        self.code = code
        self.details = details or {}

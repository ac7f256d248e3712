"""Exception hierarchy shared across the toolkit."""


class DlgkitError(Exception):
    """Base class for all toolkit errors."""


class ParseError(DlgkitError):
    """A file could not be parsed at all (malformed JSON, bad binary header)."""


class SchemaError(DlgkitError):
    """A parsed document is missing required fields or has wrong field types."""

    def __init__(self, message: str, dialogue_id: str | None = None):
        super().__init__(message)
        self.dialogue_id = dialogue_id


class InvariantError(DlgkitError):
    """Structurally valid data violates a domain invariant.

    ``offenders`` lists the ids of the objects (usually dialogues) that
    failed validation, with one human-readable diagnostic each.
    """

    def __init__(self, message: str, offenders: list[tuple[str, str]] | None = None):
        super().__init__(message)
        self.offenders = offenders or []


class ConfigError(DlgkitError):
    """A pipeline or CLI configuration value is out of its documented range."""


class PoolExhaustedError(DlgkitError):
    """A sampling pool (trivia, distractors) ran out of eligible items."""


class ScorerError(DlgkitError):
    """A scorer client failed or returned a malformed response."""


class StageError(DlgkitError):
    """A pipeline stage failed; names the stage for the CLI exit message."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause

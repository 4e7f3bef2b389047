"""Shared exception types."""


class CredenceError(Exception):
    """Base class for package errors."""


class ContractError(CredenceError):
    """A caller violated an operation precondition."""


class ConfigError(CredenceError):
    """Invalid or inconsistent run configuration."""


class ScoringBackendError(CredenceError):
    """The strength scorer could not produce a score."""


class ExtractionBackendError(CredenceError):
    """The extraction service failed or returned garbage."""


class TraceVerificationError(CredenceError):
    """An audit trace does not reproduce the recorded belief state."""

    def __init__(self, message: str, seq: int | None = None):
        super().__init__(message)
        self.seq = seq

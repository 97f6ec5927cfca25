"""Exception hierarchy shared across the package."""

from __future__ import annotations


class AgentRagError(Exception):
    """Base class for all errors raised by agentrag."""


class ValidationError(AgentRagError, ValueError):
    """Input violates a documented invariant or precondition."""


class LoadError(AgentRagError):
    """A file could not be read or decoded."""


class ConfigurationError(AgentRagError):
    """Backend or application configuration is unusable."""


class GatewayError(AgentRagError):
    """Failure while talking to a model backend."""

    retryable = False

    def __init__(self, message: str, attempts: int = 1) -> None:
        super().__init__(message)
        self.attempts = attempts

    def __str__(self) -> str:
        base = super().__str__()
        return f"{base} (after {self.attempts} attempt{'s' if self.attempts != 1 else ''})"


class TransportError(GatewayError):
    """Network-level failure or transient provider status; safe to retry."""

    retryable = True


class ProviderError(GatewayError):
    """The provider answered with an error body; retrying will not help."""

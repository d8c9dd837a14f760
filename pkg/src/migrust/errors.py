"""Exception types shared across the migration pipeline."""

from __future__ import annotations


class MigrustError(Exception):
    """Base class for all package errors."""


class ConfigError(MigrustError):
    """Invalid configuration (unknown key, bad bounds, missing file)."""


class StageError(MigrustError):
    """A pipeline stage failed in a way that halts the run.

    Carries any partial artifacts produced before the failure so the
    operator can inspect them.
    """

    def __init__(self, message: str, partial: object = None):
        super().__init__(message)
        self.partial = partial


class TemplateError(MigrustError):
    """A prompt template placeholder has no binding."""


class ToolMatrixError(MigrustError):
    """An agent was configured with tools outside its registration row."""


class InfraError(MigrustError):
    """Infrastructure fault that aborts an episode.

    Tool-level problems (bad paths, failing builds, missing files) are
    returned to the agent as result text and are never raised; this type
    is reserved for misconfiguration the agent cannot repair: missing
    workspace roots, an exhausted replay script, or an episode run
    without its required dependency fields.
    """


class ReplayExhaustedError(InfraError):
    """The replay script has no further turns for the requested agent."""

"""Shared exception base for the engine.

Every domain error raised by this package derives from :class:`EngineError`,
so callers (and the CLI) can distinguish validation failures from genuine
I/O or programming errors with a single except clause.
"""


class EngineError(Exception):
    """Base class for all domain validation errors."""

"""Exception types shared across the package."""

from __future__ import annotations


class GraphError(ValueError):
    """Malformed graph input (bad endpoint, bad file, unknown builtin)."""


class NotIrreducibleError(ValueError):
    """An operation that needs an irreducible graph got a reducible one."""


class CapExceeded(RuntimeError):
    """A configured enumeration or size cap would be exceeded.

    Raised instead of silently truncating; ``cap`` carries the limit that
    was hit so callers can report it.
    """

    def __init__(self, what: str, cap: int, needed: int | None = None):
        self.what = what
        self.cap = cap
        self.needed = needed
        msg = f"{what}: cap {cap} exceeded"
        if needed is not None:
            msg += f" (needs {needed})"
        super().__init__(msg)


class ConvergenceError(RuntimeError):
    """Power iteration did not reach its tolerance within the iteration cap."""


class ConfigError(ValueError):
    """Invalid experiment configuration."""

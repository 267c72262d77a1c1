"""Exceptions shared across modules."""


class CapExceededError(RuntimeError):
    """A problem size exceeds a configured memory cap (enumeration or statevector)."""

"""Exception types shared across the package."""


class StructuralError(ValueError):
    """An input violates a structural precondition (arity, length, range)."""


class ParseError(ValueError):
    """Instance or algebra text is malformed; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


class GuardrailError(RuntimeError):
    """A computation would exceed its configured resource cap."""


class BuildError(RuntimeError):
    """A certificate builder cannot produce a certificate; the message is the reason."""

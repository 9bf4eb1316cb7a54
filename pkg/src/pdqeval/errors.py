"""Exception types shared across the package.

Every error raised on user-supplied data derives from :class:`ValidationError`
so the CLI can map it to exit code 1 (I/O failures keep exit code 2).
"""

from __future__ import annotations


class ValidationError(Exception):
    """Invalid input data or configuration.

    ``path`` is a JSON-pointer-style location ("/objects/1/mask/rle") and
    ``line`` the 1-based line number in the offending file, when known.
    """

    def __init__(self, message: str, *, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if path:
            prefix += f"{path}: "
        super().__init__(prefix + message)


class RleDecodeError(ValidationError):
    """Malformed run-length encoding; carries the offending run index."""

    def __init__(self, message: str, run_index: int, **kw):
        self.run_index = run_index
        super().__init__(message, **kw)


class UnsupportedCovarianceError(ValidationError):
    """Covariance matrix shape the heatmap renderer does not support."""


class SweepCapError(ValidationError):
    """Sweep grid larger than the configured cap."""

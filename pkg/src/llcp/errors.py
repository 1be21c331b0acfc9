"""Exception types shared across the package."""

from __future__ import annotations


class LlcpError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(LlcpError, ValueError):
    """Arity or shape mismatch when constructing or applying an atom."""


class DomainError(LlcpError, ValueError):
    """A numeric value lies outside the domain of an atom or constant."""

    def __init__(self, message: str, path=None):
        if path:
            message = f"{message} (at {' -> '.join(path)})"
        super().__init__(message)
        self.path = tuple(path or ())


class UnknownAtomError(LlcpError, ValueError):
    """Lookup of an atom name that is not registered."""


class ProblemError(LlcpError, ValueError):
    """Invalid problem assembly: duplicate names, non-scalar objective, ..."""


class DgpError(LlcpError, ValueError):
    """Canonicalization was asked to lower a problem that fails verification."""

    def __init__(self, report):
        super().__init__(
            "problem does not satisfy the composition rules:\n" + report.message
        )
        self.report = report


class ParseError(LlcpError, ValueError):
    """Problem-document parsing failure with a machine-readable code.

    ``code`` is one of: "io", "syntax", "schema", "unknown-atom",
    "unknown-variable", "shape-mismatch", "nonpositive-constant",
    "duplicate-variable", "positivity", "bad-parameter".
    """

    def __init__(self, code: str, message: str, line=None, column=None):
        loc = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"[{code}] {message}{loc}")
        self.code = code
        self.line = line
        self.column = column

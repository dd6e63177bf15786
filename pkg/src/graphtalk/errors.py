"""Exception hierarchy shared by every graphtalk module."""

from __future__ import annotations


class GraphTalkError(Exception):
    """Base class for all graphtalk errors."""


class NotFoundError(GraphTalkError, LookupError):
    def __init__(self, query: str, what: str = "name"):
        super().__init__(f"unknown {what}: {query!r}")
        self.query = query
        self.what = what


class SchemaError(GraphTalkError):
    pass


class SchemaConflictError(SchemaError):
    pass


class ParseError(GraphTalkError):
    """Syntax error in logical-form text.

    ``position`` is a 1-based ``(line, column)`` pair; ``offset`` is the
    0-based character offset of the offending token.
    """

    def __init__(self, position: tuple[int, int], expected: list[str], found: str, offset: int = 0):
        self.position = position
        self.expected = list(expected)
        self.found = found
        self.offset = offset
        exp = ", ".join(self.expected) if self.expected else "nothing"
        super().__init__(f"{position[0]}:{position[1]}: expected {exp}, found {found!r}")


class UnknownIdentifierError(NotFoundError):
    def __init__(self, identifier: str, what: str, position: tuple[int, int]):
        super().__init__(identifier, what)
        self.identifier = identifier
        self.position = position
        self.args = (f"{position[0]}:{position[1]}: unknown {what}: {identifier!r}",)


class TypeCheckError(GraphTalkError):
    pass


class CompileError(GraphTalkError):
    def __init__(self, message: str, mentions: list[str] | None = None):
        super().__init__(message)
        self.mentions = list(mentions or [])


class UnsupportedConstruct(GraphTalkError):
    def __init__(self, construct: str, location: int = 0):
        super().__init__(f"unsupported SPARQL construct {construct!r} at offset {location}")
        self.construct = construct
        self.location = location


class SparqlSyntaxError(GraphTalkError):
    def __init__(self, message: str, location: int = 0):
        super().__init__(f"{message} (offset {location})")
        self.location = location


class EvaluationError(GraphTalkError):
    pass


class LoadError(GraphTalkError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class ValidationError(GraphTalkError, ValueError):
    pass


class ModeViolation(GraphTalkError):
    pass


class RemoteError(GraphTalkError):
    """Base class for endpoint failures (exit code 2 in the CLI)."""


class RemoteTimeout(RemoteError):
    pass


class RemoteHTTPError(RemoteError):
    def __init__(self, status: int, excerpt: str):
        super().__init__(f"HTTP {status}: {excerpt}")
        self.status = status
        self.excerpt = excerpt


class CacheMiss(RemoteError):
    def __init__(self, key: str):
        super().__init__(f"offline cache miss for key {key}")
        self.key = key


class ProtocolError(RemoteError):
    def __init__(self, message: str, excerpt: str):
        super().__init__(f"{message}: {excerpt!r}")
        self.excerpt = excerpt

"""Exception hierarchy shared across the engine."""


class AnyKQError(Exception):
    """Base class for every error raised by this package."""


class QuerySyntaxError(AnyKQError):
    """Malformed query text. Carries 1-based line/column of the offending token."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        if line:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class SchemaError(AnyKQError):
    """Query/data mismatch: arity, column tags, weight-table coverage, missing files."""


class CyclicQueryError(AnyKQError):
    """The query hypergraph is not alpha-acyclic. Carries the residual hyperedges."""

    def __init__(self, residual):
        self.residual = residual
        pretty = ", ".join("{" + ",".join(sorted(e)) + "}" for e in residual)
        super().__init__(f"query is cyclic; GYO residual hyperedges: {pretty}")


class NotAchievable(AnyKQError):
    """No join tree / relation order realizes the requested lexicographic order.

    Internal signal only: callers fall back to the SUM-encoding route.
    """


class EmptyResult(AnyKQError):
    """Preprocessing emptied the root relation: the query has no answers."""


class TooLargeError(AnyKQError):
    """Oracle guard: materializing the full join would exceed the row budget."""

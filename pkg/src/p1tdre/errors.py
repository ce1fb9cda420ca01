"""Exception hierarchy.

Errors split into two families so front ends can map them to exit codes:
``DataError`` for malformed input and ``DegeneracyError`` for inputs that
parse fine but on which an estimator or fit is undefined.
"""


class P1Error(Exception):
    """Base class for all package errors."""

    code = "error"

    def to_dict(self) -> dict:
        return {"error": type(self).__name__, "message": str(self)}


class DataError(P1Error, ValueError):
    pass


class DegeneracyError(P1Error, ArithmeticError):
    pass


class ParseError(DataError):
    def __init__(self, line: int, message: str = "malformed edge"):
        self.line = line
        super().__init__(f"line {line}: {message}")

    def to_dict(self) -> dict:
        return {**super().to_dict(), "line": self.line}


class SelfLoop(ParseError):
    def __init__(self, line: int):
        super().__init__(line, "self-loop")


class DuplicateEdge(ParseError):
    def __init__(self, line: int):
        super().__init__(line, "duplicate edge")


class InvalidDesign(DataError):
    pass


class InvalidIndices(DataError):
    pass


class InvalidArity(DataError):
    pass


class DegenerateCounts(DegeneracyError):
    """A triple count in a log-ratio is zero, so the estimator is undefined.

    ``nodes`` holds the offending anchor nodes; for the degree parameters
    it holds ``(i, t)`` pairs.
    """

    def __init__(self, nodes, what: str = "count"):
        self.nodes = sorted(nodes)
        self.what = what
        shown = self.nodes[:10]
        more = "" if len(self.nodes) <= 10 else f" (+{len(self.nodes) - 10} more)"
        super().__init__(f"zero {what} at {shown}{more}")

    def to_dict(self) -> dict:
        nodes = [list(x) if isinstance(x, tuple) else x for x in self.nodes]
        return {**super().to_dict(), "nodes": nodes, "what": self.what}


class EmptyFilter(DegeneracyError):
    pass


class ZeroMu(DegeneracyError):
    def __init__(self, abc: str, index):
        self.abc = abc
        self.index = index
        super().__init__(f"mu^({abc}) vanishes at {index}")


class SingularCovariance(DegeneracyError):
    pass


class NotConverged(DegeneracyError):
    def __init__(self, grad_norm: float, iterations: int, reason: str | None = None):
        self.grad_norm = grad_norm
        self.iterations = iterations
        super().__init__(
            reason
            or f"no convergence after {iterations} iterations (score residual {grad_norm:.3g})"
        )

    def to_dict(self) -> dict:
        return {**super().to_dict(), "grad_norm": self.grad_norm, "iterations": self.iterations}


class Diverged(DegeneracyError):
    pass

"""Exception types raised across the package."""

from __future__ import annotations


class TopKEvalError(Exception):
    """Base class for every error raised by topk_eval."""


# metrics
class InvalidCutoffError(TopKEvalError, ValueError):
    pass


class UndefinedRecallError(TopKEvalError, ValueError):
    pass


class ZeroRateError(TopKEvalError, ValueError):
    pass


class DomainError(TopKEvalError, ValueError):
    pass


class EmptyInputError(TopKEvalError, ValueError):
    pass


class MissingParameterError(TopKEvalError, ValueError):
    pass


# dataset
class ParseError(TopKEvalError, ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SchemaError(TopKEvalError, ValueError):
    def __init__(self, key: str, message: str | None = None, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message or 'missing required key'} {key!r}")
        self.key = key
        self.line = line


class CrossLinkError(TopKEvalError, ValueError):
    pass


class CorruptRankError(TopKEvalError, IndexError):
    pass


# ranker
class GeometryError(TopKEvalError, ValueError):
    pass


# judge
class DeliveryError(TopKEvalError, RuntimeError):
    def __init__(self, message: str, attempts: int):
        super().__init__(message)
        self.attempts = attempts


class EmptyResponseError(TopKEvalError, RuntimeError):
    pass


class EmptyContextError(TopKEvalError, ValueError):
    pass


class MissingFieldError(TopKEvalError, ValueError):
    pass


class GradeParseError(TopKEvalError, ValueError):
    def __init__(self, raw: str):
        super().__init__(f"cannot parse a 1-5 grade from reply {raw!r}")
        self.raw = raw


# analysis
class ShapeError(TopKEvalError, ValueError):
    pass


class UndefinedCorrelationError(TopKEvalError, ValueError):
    pass


class AlignmentError(TopKEvalError, ValueError):
    pass


class IncompleteSampleError(TopKEvalError, ValueError):
    pass

"""Exception hierarchy shared by every extenso module."""

from __future__ import annotations


class ExtensoError(Exception):
    """Base class for all errors raised by extenso."""


class ExprSyntaxError(ExtensoError):
    def __init__(self, message: str, offset: int, expected: frozenset[str] = frozenset()):
        self.offset = offset
        self.expected = frozenset(expected)
        detail = f" (expected one of: {', '.join(sorted(self.expected))})" if self.expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")


class UnknownFunctionError(ExtensoError):
    def __init__(self, name: str, offset: int):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown function {name!r} at offset {offset}; only ln and exp are supported")


class UnboundIdentifierError(ExtensoError):
    def __init__(self, names):
        self.names = tuple(sorted(names))
        super().__init__(f"unbound identifier(s): {', '.join(self.names)}")


class DomainError(ExtensoError, ValueError):
    """A point lies outside the domain of a field or of an elementary function."""


class DimensionError(ExtensoError, ValueError):
    """Operands live on charts (or jets) of incompatible dimension or order."""


class FlowDomainExit(DomainError):
    def __init__(self, message: str, exit_time: float):
        self.exit_time = exit_time
        super().__init__(f"{message} (estimated exit time {exit_time:.6g})")


class StepSizeUnderflow(ExtensoError):
    def __init__(self, t: float, h: float):
        self.t = t
        self.h = h
        super().__init__(f"step size underflow at t={t:.6g} (h={h:.3g})")


class SingularPointError(ExtensoError):
    """The vector field vanishes where a nonzero value is required."""


class NewtonDivergence(ExtensoError):
    """Shooting or projection failed to converge."""


class VanishingTransversality(ExtensoError):
    def __init__(self, point, value: float):
        self.point = tuple(float(x) for x in point)
        self.value = value
        super().__init__(f"theta(rho) = {value:.3g} vanishes near {self.point}")


class ClosednessViolation(ExtensoError):
    def __init__(self, residual: float, point):
        self.residual = residual
        self.point = tuple(float(x) for x in point)
        super().__init__(f"d(theta/theta(rho)) = {residual:.3g} at {self.point}; form is not closed")


class NotExtensiveError(ExtensoError):
    """A precondition demanding an extensive function or form failed."""


class NonConstantRatio(ExtensoError):
    def __init__(self, message: str, witnesses=()):
        self.witnesses = list(witnesses)
        super().__init__(message)


class EmptyOverlapError(ExtensoError):
    """Two charts share no sample points."""


class ConfigError(ExtensoError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None,
                 key: str | None = None):
        self.line = line
        self.column = column
        self.key = key
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)

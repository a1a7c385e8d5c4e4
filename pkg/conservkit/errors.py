"""Error hierarchy; every library failure derives from ConservkitError."""

from __future__ import annotations

from typing import Any, Optional


class ConservkitError(Exception):
    """Base class for every error raised by the library."""


class DslSyntaxError(ConservkitError):
    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class UnknownSymbolError(ConservkitError):
    def __init__(self, name: str, line: Optional[int] = None, column: Optional[int] = None) -> None:
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"unknown symbol '{name}'{where}")
        self.name = name
        self.line = line
        self.column = column


class SymbolTableError(ConservkitError):
    pass


class JetOverflowError(ConservkitError):
    pass


class MissingDerivativeRule(ConservkitError):
    pass


class PreconditionError(ConservkitError):
    pass


class IrreducibleError(PreconditionError):
    def __init__(self, order: int) -> None:
        super().__init__(f"irreducible at order {order}")
        self.order = order


class NotADensityError(PreconditionError):
    pass


class NoClosedFormError(ConservkitError):
    def __init__(self, message: str, residual: Any = None) -> None:
        detail = f": {residual}" if residual is not None else ""
        super().__init__(f"no closed form{detail}" if not message else f"{message}{detail}")
        self.residual = residual


class DegenerateTransformationError(ConservkitError):
    pass


class ContactConditionError(ConservkitError):
    pass


class InversionError(ConservkitError):
    def __init__(self, message: str, mixed: Any = None) -> None:
        super().__init__(message)
        self.mixed = mixed


class InternalConsistencyError(ConservkitError):
    pass

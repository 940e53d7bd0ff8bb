"""Exception hierarchy for the engine.

Every error raised by the library derives from ModalgError so callers can
catch one type at the CLI boundary.
"""


class ModalgError(Exception):
    """Base class for all engine errors."""


class CapExceeded(ModalgError):
    """The instance is too large for explicit enumeration."""


class ArityMismatch(ModalgError):
    pass


class UnknownBuiltin(ModalgError):
    pass


class UnboundModuleVar(ModalgError):
    pass


class UnboundSetVar(ModalgError):
    pass


class UnmappedVariable(ModalgError):
    """A relational variable maps to no vocabulary symbol (or a missing one)."""


class NonMonotoneDetected(ModalgError):
    """Defensive: a least-fixed-point iteration step shrank the set."""


class IllegalSelect(ModalgError):
    """A selection operand classifies as neither input nor output of the body."""


class IncompleteStructure(ModalgError):
    pass


class NonSingletonEncoding(ModalgError):
    pass


class NonPropositionalFormula(ModalgError):
    pass


class UnsafeRule(ModalgError):
    pass


class WellformednessError(ModalgError):
    """Raised by evaluators on ill-formed input (diagnostics list the cause)."""


class SpecSyntaxError(ModalgError):
    """Surface-syntax parse error, with line/column info."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column

"""Exception types raised across the package."""


class LookdownError(Exception):
    """Base class for all errors raised by :mod:`lookdown`."""


class SpecError(LookdownError, ValueError):
    """A model specification is inconsistent."""


class SizeMismatch(SpecError):
    """Litter sizes of a generation do not add up to the next population size."""


class EmptyGeneration(SpecError):
    """A generation before the extinction time has no individuals."""


class BudgetExceeded(LookdownError):
    """An exact enumeration would exceed the configured budget."""


class DimensionMismatch(LookdownError, ValueError):
    """A per-generation permutation does not fit the genealogy it is applied to."""


class OutOfRange(LookdownError, IndexError):
    """A generation or vertex index lies outside the genealogy."""


class TooSmall(LookdownError, ValueError):
    pass


class EmptyInput(LookdownError, ValueError):
    pass


class DegenerateMean(LookdownError, ValueError):
    """An offspring distribution with mean zero cannot be size-biased."""


class InsufficientSamples(LookdownError, ValueError):
    pass


class InsufficientReps(LookdownError, ValueError):
    pass


class UnmatchedSupport(LookdownError, ValueError):
    """A sampled outcome has probability zero under the reference law."""


class ParseError(LookdownError, ValueError):
    """A configuration document is not well formed."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)


class ValidationError(LookdownError, ValueError):
    """A configuration field is missing or invalid."""

    def __init__(self, field, message=None):
        self.field = field
        super().__init__(field if message is None else f"{field}: {message}")

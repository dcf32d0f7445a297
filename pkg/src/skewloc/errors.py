"""Exception hierarchy shared by all modules."""


class SkewlocError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgument(SkewlocError, ValueError):
    pass


class NotFound(SkewlocError, LookupError):
    pass


class NumericalError(SkewlocError, ArithmeticError):
    pass


class SingularWindow(NumericalError):
    """The window matrix H_I - E has a pivot below the singularity tolerance.

    Signals that E lies (numerically) in the spectrum of the restricted operator.
    """


class ResourceLimit(SkewlocError):
    pass


class SpecFormatError(SkewlocError, ValueError):
    """A spec file could not be parsed; ``line`` and ``field`` locate the problem."""

    def __init__(self, message, *, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)
        self.line = line
        self.field = field

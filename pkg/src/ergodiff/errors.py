"""Exception hierarchy shared by every module of the package."""


class ErgodiffError(Exception):
    """Base class for all errors raised by ergodiff."""


class InvalidInputError(ErgodiffError, ValueError):
    """Malformed arguments: dimension mismatch, empty sets, mixed point kinds."""


class RangeError(ErgodiffError, ValueError):
    """A group element or index lies outside a system's supported range."""


class UnsupportedError(ErgodiffError, NotImplementedError):
    """The requested operation is not defined for this system or observable."""


class PreconditionError(ErgodiffError, ValueError):
    """A mathematical hypothesis of the operation does not hold."""


class ZeroMeasureError(ErgodiffError, ZeroDivisionError):
    """Spatial average requested over a region of measure zero."""

    def __init__(self, message, k=None):
        super().__init__(message)
        self.k = k


class NoCounterexampleError(ErgodiffError):
    """The observable is Herman, so no divergent sequence of regions exists."""


class ConfigError(ErgodiffError, ValueError):
    """Malformed experiment configuration."""

    def __init__(self, message, field=None, line=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field '{field}'")
        prefix = f"{', '.join(loc)}: " if loc else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line


class HypothesisUnmetError(ErgodiffError):
    """A decay hypothesis fails on the window, so no convergence is asserted."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report

"""Exception types raised by the pipeline, tagged with the stage that failed."""


class HiGarroteError(Exception):
    """Base class for all library errors."""

    stage = None

    def with_stage(self, stage):
        self.stage = stage
        return self


class InvalidCodingError(HiGarroteError):
    """Coding matrix is malformed (wrong size, non-orthogonal, singular)."""


class InvalidInputError(HiGarroteError):
    """Inputs violate a documented precondition."""


class DegenerateResponseError(HiGarroteError):
    """Response is constant; there is nothing to select."""


class NumericalFailureError(HiGarroteError):
    """A linear-algebra step failed beyond recovery.

    `jitter` carries the last diagonal jitter attempted before giving up.
    """

    def __init__(self, message, jitter=None):
        super().__init__(message)
        self.jitter = jitter


class NonconvergenceError(HiGarroteError):
    """Iterative solver hit its cap; `best` carries the last iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ParseError(HiGarroteError):
    """A design file or config failed to parse; carries location info."""

    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.column = column

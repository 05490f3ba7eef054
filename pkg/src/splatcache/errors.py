"""Exception types shared across the package.

All validation failures raise one of these so callers (and the CLI, which
maps them to exit codes) can tell bad input apart from internal bugs.
"""


class InvalidInput(ValueError):
    """Raised when an argument violates a documented precondition."""


class DegenerateGeometry(InvalidInput):
    """Raised when a geometric construction is undefined (e.g. coincident
    camera centers for a two-view epipolar relation)."""


class IllPosedFit(InvalidInput):
    """Raised when an estimation problem has no unique solution.

    Carries the number of samples that supported the fit so callers can
    report how much data was available.
    """

    def __init__(self, message: str, support: int = 0):
        super().__init__(message)
        self.support = support


class PipelineError(RuntimeError):
    """Raised when a multi-stage run fails; identifies the failing chunk."""

    def __init__(self, message: str, chunk_index: int = -1):
        super().__init__(message)
        self.chunk_index = chunk_index

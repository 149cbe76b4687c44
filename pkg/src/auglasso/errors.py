"""Exception types raised across the package."""


class AuglassoError(Exception):
    """Base class for all package errors."""


class ZeroColumn(AuglassoError, ValueError):
    def __init__(self, j):
        super().__init__(f"column {j} has zero norm")
        self.column = j


class NotNormalized(AuglassoError, ValueError):
    pass


class TooFewColumns(AuglassoError, ValueError):
    pass


class EmptyIndexSet(AuglassoError, ValueError):
    pass


class RowMismatch(AuglassoError, ValueError):
    pass


class DimensionMismatch(AuglassoError, ValueError):
    pass


class OutOfRange(AuglassoError, ValueError):
    pass


class TooLarge(AuglassoError, ValueError):
    pass


class NoAdmissibleSubset(AuglassoError):
    pass


class DimensionUnsupported(AuglassoError, ValueError):
    pass


class TargetTooSmall(AuglassoError, ValueError):
    pass


class Exhausted(AuglassoError):
    def __init__(self, max_tries):
        super().__init__(f"no admissible subset accepted after {max_tries} draws")
        self.max_tries = max_tries


class NotConverged(AuglassoError):
    """Raised when coordinate descent runs out of sweeps.

    The partial fit is attached so callers can still inspect it.
    """

    def __init__(self, fit):
        super().__init__(
            f"coordinate descent stopped after {fit.sweeps} sweeps "
            f"with KKT residual {fit.kkt_residual:.3e}"
        )
        self.fit = fit


class ReductionFailed(AuglassoError):
    pass


class SparsityTooLarge(AuglassoError, ValueError):
    pass


class Infeasible(AuglassoError):
    pass

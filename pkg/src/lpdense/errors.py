"""Exception hierarchy shared by the solver modules."""


class LpDenseError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(LpDenseError, ValueError):
    """Operands with incompatible shapes."""


class DomainError(LpDenseError, ValueError):
    """An argument lies outside the domain of the operation."""


class IndefiniteMatrixError(LpDenseError):
    """A Cholesky pivot was negative beyond round-off.

    The normal-equations matrices handled here are positive semidefinite by
    construction, so this always points at a caller bug such as a
    nonpositive scaling vector.
    """

    def __init__(self, column, pivot):
        super().__init__(f"negative pivot {pivot:.3e} at column {column}")
        self.column = column
        self.pivot = pivot


class MpsParseError(LpDenseError):
    def __init__(self, message, line=None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


class ModelError(LpDenseError):
    """The LP model is inconsistent (bad bounds, infeasible trivially, ...)."""


class StrategyError(LpDenseError):
    """A direction strategy could not produce an acceptable dy.

    ``iterations`` carries the CG iteration count when the failure came from
    the iterative solve.
    """

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations

"""Error kinds raised by the finite element core."""


class SolverError(Exception):
    """Base class for every error raised by ``qge_project.apps.fem``."""


class InvalidArgument(SolverError, ValueError):
    pass


class UnsupportedDegree(InvalidArgument):
    pass


class LookupFailure(SolverError, LookupError):
    """A point could not be located in any triangle of a mesh."""


class NumericalFailure(SolverError, ArithmeticError):
    """Singular factorization or non-finite values in a solve."""


class OutputFailure(SolverError, OSError):
    pass

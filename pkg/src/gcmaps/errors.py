"""Exception hierarchy.

Every error carries an ``exit_code`` so the command-line layer can map
failures without a lookup table of its own.
"""


class GcError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ParseError(GcError):
    """Malformed system or model document.

    Attributes
    ----------
    line, col : int
        1-based position of the offending token (0 if unknown).
    expected : tuple of str
        Token kinds that would have been accepted at that position.
    """

    exit_code = 2

    def __init__(self, message, line=0, col=0, expected=()):
        self.line = line
        self.col = col
        self.expected = tuple(expected)
        where = f"line {line}, col {col}: " if line else ""
        tail = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{where}{message}{tail}")


class ValidationError(GcError, ValueError):
    exit_code = 3


class DimensionError(ValidationError):
    pass


class SemanticError(ValidationError):
    """Undefined identifier, wrong arity or dimension mismatch in a document."""

    def __init__(self, message, line=0, col=0):
        self.line = line
        self.col = col
        where = f"line {line}, col {col}: " if line else ""
        super().__init__(f"{where}{message}")


class UnsupportedError(ValidationError):
    """Request outside the supported regime (e.g. subsampling an unstable model)."""


class DiffusionError(ValidationError):
    """Diffusion covariance not symmetric positive-definite at a queried point."""


class SolverError(GcError):
    exit_code = 4


class SingularEquationError(SolverError):
    """Matrix equation has no unique solution (e.g. eigenvalue pair summing to zero)."""


class NoSolutionError(SolverError):
    """No stabilising Riccati solution.

    ``spectrum`` holds the Hamiltonian eigenvalues when available.
    """

    def __init__(self, message, spectrum=None):
        self.spectrum = spectrum
        super().__init__(message)


class ConvergenceError(SolverError):
    pass


class NotDetectableError(SolverError):
    pass


class ConsistencyError(SolverError):
    pass


class DegeneracyError(GcError):
    exit_code = 5


class IllConditionedCovarianceError(DegeneracyError):
    pass


class NumericalDegeneracyError(DegeneracyError):
    pass


class DomainError(DegeneracyError):
    """Non-finite value produced while evaluating a system at a point."""


class CoverageError(DegeneracyError):
    """Too many failed samples to form a trustworthy average."""


class DivergenceError(GcError):
    exit_code = 6

    def __init__(self, message, state=None, time=None):
        self.state = state
        self.time = time
        super().__init__(message)

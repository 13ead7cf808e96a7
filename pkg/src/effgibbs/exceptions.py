"""Exception hierarchy shared by all modules."""


class EffGibbsError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(EffGibbsError, ValueError):
    """Operands have incompatible shapes."""


class NotHermitianError(EffGibbsError, ValueError):
    """A matrix expected to be Hermitian is not, within tolerance."""


class DomainError(EffGibbsError, ValueError):
    """A matrix function was applied outside its domain (e.g. log of a nonpositive eigenvalue)."""


class NumericalError(EffGibbsError, ArithmeticError):
    """A numerical routine failed or produced an unusable result."""

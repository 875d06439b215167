"""Exception hierarchy shared across the package."""


class RieszminError(Exception):
    """Base class for all package errors."""


class UsageError(RieszminError):
    """Bad command-line arguments or unreadable / malformed input files."""


class ValidationError(RieszminError):
    """Domain-level validation failure: bad parameters, dimension mismatch,
    mass not adding up, and the like."""


class GradientUndefinedError(ValidationError):
    """Gradient requested where it does not exist (e.g. coincident points
    under a kernel that is singular or non-smooth at zero separation)."""


class NumericalError(RieszminError):
    """A numerical procedure failed to converge or produced no usable result."""


class IntegrabilityError(NumericalError):
    """Quadrature refinements near the origin did not decay: the integrand
    looks non-integrable."""


class OptimizationError(NumericalError):
    """Every restart of the optimizer diverged or failed."""


class QuantizeError(NumericalError):
    """Representative selection or partition construction failed."""

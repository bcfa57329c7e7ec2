"""Exception types raised across the package."""


class FopidAvrError(Exception):
    """Base class for package errors."""


class DegenerateLoop(FopidAvrError):
    """The closed-loop characteristic polynomial vanishes identically."""


class ImproperTransferFunction(FopidAvrError):
    """Numerator degree exceeds denominator degree."""


class NumericalDivergence(FopidAvrError):
    """A simulated state left the admissible magnitude range."""


class SingularEquilibrium(FopidAvrError):
    """No unique equilibrium exists for the requested constant input."""


class InvalidParams(FopidAvrError, ValueError):
    """Plant or configuration parameters are outside their hard limits."""


class DegenerateState(FopidAvrError, ValueError):
    """The chaotic map left (0, 1) or was seeded on a periodic point."""


class ArityMismatch(FopidAvrError, ValueError):
    """Objective vectors of different lengths were compared."""

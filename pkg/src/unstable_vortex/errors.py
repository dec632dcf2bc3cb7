"""Exception hierarchy shared by the numerical modules and the CLI."""


class VortexError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(VortexError, ValueError):
    """An input lies outside the domain where an operation is defined."""


class NumericalError(VortexError, ArithmeticError):
    """A numerical routine failed to reach its tolerance.

    ``estimate`` carries the best value obtained, when one exists.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class InstabilityNotFound(VortexError):
    """No eigenvalue with positive growth rate exists for the given data."""


class ContractionFailure(NumericalError):
    """The fixed-point map did not contract.

    ``update_norms`` holds the sequence of update norms seen so far.
    """

    def __init__(self, message, update_norms=()):
        super().__init__(message, estimate=None)
        self.update_norms = list(update_norms)


class InstabilityLost(VortexError):
    """The regularized eigenvalue left the upper half plane."""


class BranchLost(NumericalError):
    """Eigenvalue continuation found no match within the matching radius.

    ``b`` is the offending parameter and ``table`` the rows computed before it.
    """

    def __init__(self, message, b=None, table=()):
        super().__init__(message)
        self.b = b
        self.table = list(table)


class BundleError(VortexError):
    """A saved bundle is unreadable or fails its consistency checks."""

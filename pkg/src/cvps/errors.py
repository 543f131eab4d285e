"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of a kernel."""


class PostSelectionError(ArithmeticError):
    """The requested post-selection outcome has zero probability."""


class UnphysicalError(ArithmeticError):
    """A covariance matrix violates the uncertainty principle.

    ``eigenvalue`` holds the offending symplectic eigenvalue (or variance).
    """

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue

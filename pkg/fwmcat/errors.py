"""Errors - Exception classes that distinguish invalid input (configuration
errors) from failures of the numerical machinery. Both derive from standard
exceptions so that callers that only catch ValueError keep working.
"""


class ConfigurationError(ValueError):
    """Raised for invalid scenario configurations and any parameter that
    violates a precondition, e.g., a Fock space exceeding the dimension limit
    or a dense solver request above the dense limit.
    """
    pass


class NumericalError(ArithmeticError):
    """Raised when a computation fails although its inputs were valid, e.g.,
    step-size underflow of the integrator, a failed jump-time bisection, or a
    series without an interior extremum.

    Attributes
    ----------
    diagnostics : dict
        Solver state at the time of failure
    """
    def __init__(self, message, diagnostics=None):
        """Initialize the error message and optional diagnostics.

        Parameters
        ----------
        message : string
            Error message
        diagnostics : dict, optional
            Solver state at the time of failure
        """
        super(NumericalError, self).__init__(message)
        self.diagnostics = diagnostics or {}

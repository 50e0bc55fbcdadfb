"""Exception types raised across the package."""


class ConfigurationError(ValueError):
    """Invalid parameter combination (window/hop, band width, room geometry...)."""


class NumericalError(ArithmeticError):
    """A computation produced non-finite values.

    ``iteration`` is set when the failure happened inside an iterative solver.
    """

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration

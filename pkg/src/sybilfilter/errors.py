"""Exception types raised across the package."""


class SybilFilterError(Exception):
    pass


class MalformedInputError(SybilFilterError, ValueError):
    pass


class DegenerateDegreeError(SybilFilterError, ValueError):
    """A construction needs nonzero degrees (or at least one edge)."""


class ParameterError(SybilFilterError, ValueError):
    pass


class LabelBudgetError(SybilFilterError, ValueError):
    pass


class SingularFilterError(SybilFilterError, ArithmeticError):
    def __init__(self, msg, eigenvalue=None):
        super().__init__(msg)
        self.eigenvalue = eigenvalue


class DomainError(SybilFilterError, ValueError):
    pass


class NumericalFailureError(SybilFilterError, ArithmeticError):
    pass


class ConvergenceError(SybilFilterError, ArithmeticError):
    pass


class EmptyBandError(SybilFilterError, ValueError):
    pass


class NonstandardMethodError(SybilFilterError, ValueError):
    pass


class UndefinedMetricError(SybilFilterError, ValueError):
    pass

"""Exception types shared across the package."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class ScenarioError(ValueError):
    """Invalid scenario configuration.

    ``problems`` lists every violated constraint, not only the first.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class SolverError(RuntimeError):
    """Nonlinear iteration failed to converge."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NumericalError(RuntimeError):
    """The time stepper produced NaN or a negative density beyond tolerance."""

    def __init__(self, message, dump=None):
        super().__init__(message)
        self.dump = dump


class ConfigurationError(ValueError):
    """Solver configuration inconsistent with the stability rule."""


class FrontLogicError(RuntimeError):
    """Front endpoint reached g = INFINITE without a nucleation scan."""


class BarrierConstructionError(ValueError):
    """No admissible parameters exist for the requested barrier."""


class TruncationWarning(UserWarning):
    """Outer radius was expanded to satisfy the finite-propagation bound."""


class ContractWarning(UserWarning):
    """A soft invariant (for example the pressure cap) was violated."""

"""Exception and warning types shared across the toolkit."""


class CCBoxError(Exception):
    """Base class for all toolkit errors."""


class DomainError(CCBoxError):
    """A point lies outside the family's outer domain box."""


class DomainEscapeError(CCBoxError):
    """A trajectory left the outer domain box during integration."""

    def __init__(self, message, exit_time=None, point=None):
        super().__init__(message)
        self.exit_time = exit_time
        self.point = point


class UnsupportedDepthError(CCBoxError):
    """A bracket word is longer than the family's declared step."""


class StiffnessError(CCBoxError):
    """Step-halving error estimates failed to converge."""


class HormanderViolationError(CCBoxError):
    """All commutator determinants vanish at some point."""


class DegenerateBasisError(CCBoxError):
    """A selected commutator n-tuple has (numerically) zero determinant."""


class SingularScalingError(CCBoxError):
    """The scaling-map differential is singular at a sample point."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class NonConvergenceError(CCBoxError):
    """Newton inversion did not converge within the iteration budget."""

    def __init__(self, message, last_iterate=None, residual=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class IllConditionedJacobianError(CCBoxError):
    """Finite-difference step too small relative to integration tolerance."""


class UnreachableWithinBudgetError(CCBoxError):
    """The path optimizer found no admissible path within its budget.

    Not a claim of unreachability."""


class ConfigError(CCBoxError):
    """A family definition file or CLI configuration is malformed."""


class HormanderWarning(UserWarning):
    """The estimated spanning constant is (numerically) zero."""

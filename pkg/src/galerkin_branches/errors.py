"""Exception types shared across the package."""


class InadmissibleWeightError(ValueError):
    """The weight has no positive part on the grid, so no positive eigenvalue exists."""


class DegenerateGapError(ValueError):
    """The first two eigenvalues coincide (multiplicity > 1)."""


class InconsistentInputError(ValueError):
    pass


class NonConvergenceError(RuntimeError):
    """Newton iteration stopped without reaching the requested tolerance."""


class SingularJacobianError(NonConvergenceError):
    """The Jacobian is numerically singular, typically at a bifurcation point."""


class ConfigError(ValueError):
    pass

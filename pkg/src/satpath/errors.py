"""Exception hierarchy shared across the package."""


class SatpathError(Exception):
    """Base class for all domain errors raised by this package."""


class StructureError(SatpathError):
    """Malformed input: dimension mismatch, invalid simplex, bad partition."""


class BudgetError(SatpathError):
    """A size cap was exceeded (tensor entries, lattice points, state space)."""


class SolverFailure(SatpathError):
    """No equilibrium within tolerance was found by the requested method."""

    def __init__(self, message, game=None, best_residual=None):
        super().__init__(message)
        self.game = game
        self.best_residual = best_residual

"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid specification: bad parameters, malformed config, or an
    unusable norm/domain pairing."""


class CapabilityError(RuntimeError):
    """The requested operation is not provided by this norm family
    (e.g. gradients of the 1- or max-norm)."""


class NonDifferentiableError(RuntimeError):
    """Gradient requested at a corner of a non-smooth norm.

    In 2D the two one-sided gradients are attached as ``one_sided``
    (a pair of vectors) so callers can inspect the corner.
    """

    def __init__(self, message, one_sided=None):
        super().__init__(message)
        self.one_sided = one_sided


class MeshingError(RuntimeError):
    """Triangulation failed to meet its quality or conformity invariants."""


class SolverError(RuntimeError):
    """Energy minimization did not converge; carries the residual history."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals) if residuals is not None else []

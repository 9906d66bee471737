"""Exception types raised across the package."""


class GeometryError(Exception):
    pass


class NonConvexPoint(GeometryError):
    """The boundary Hessian form is not positive definite at a point."""


class NegativeSpeed(GeometryError):
    """A perturbation moves the boundary inwards (violates K^t containing K)."""


class BadSubspace(GeometryError, ValueError):
    pass


class EpsilonTooLarge(GeometryError):
    """A section or cap leaves the local patch around the tangency point."""


class DimensionMismatch(GeometryError, ValueError):
    pass


class UnsupportedCombination(ValueError):
    pass


class PoorFit(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NotASymmetryOfK(ValueError):
    pass


class ConfigError(ValueError):
    def __init__(self, message, field=None, line=None):
        where = []
        if field is not None:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
        self.field = field
        self.line = line

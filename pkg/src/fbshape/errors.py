"""Exception types shared across the package."""


class FBShapeError(Exception):
    """Base class for all package errors."""


class DomainError(FBShapeError, ValueError):
    """A star domain or convex body violates its invariants."""


class StepTooLarge(DomainError):
    """A deformation step pushed the radial function below its floor."""


class MeshingError(FBShapeError):
    pass


class SolverError(FBShapeError):
    pass


class SupportError(FBShapeError, ValueError):
    """The source support is not contained in the domain."""


class ConditionError(FBShapeError, ValueError):
    pass

"""Exception hierarchy. Each class names one failure mode of the public API."""


class BilliardError(Exception):
    """Base class for all library errors."""


class InvalidSpec(BilliardError):
    """Input geometry cannot form a valid billiard."""


class NonSimplePolygon(InvalidSpec):
    pass


class HoleOutsideOuter(InvalidSpec):
    pass


class IrrationalAngle(InvalidSpec):
    pass


class AngleSumViolation(InvalidSpec):
    pass


class UnknownBasisIndex(InvalidSpec):
    pass


class DegenerateLine(BilliardError):
    pass


class EmptyInput(BilliardError):
    pass


class Overflow(BilliardError):
    pass


class ClosureViolation(BilliardError):
    pass


class MixedBasis(BilliardError):
    pass


class InvalidVertex(BilliardError):
    pass


class NoGluingSide(BilliardError):
    pass


class UnpairedSide(BilliardError):
    pass


class NotBoundaryCell(BilliardError):
    pass


class NotTwinSide(BilliardError):
    pass


class DegeneratePeriods(BilliardError):
    pass


class NoCoprimeSolution(BilliardError):
    pass


class ZeroQuantumNumber(BilliardError):
    pass


class PointOutside(BilliardError):
    pass


class UnknownFamily(BilliardError):
    pass


class BadParameters(BilliardError):
    pass


class SideNotFound(BilliardError):
    pass


class PeriodsNotOrthogonal(BilliardError):
    pass


class SymmetryAbsent(BilliardError):
    pass


class BadResolution(BilliardError):
    pass


class AdjacentGapTooWide(BilliardError):
    pass


class ConditionFViolated(UserWarning):
    """A periodic state whose correction energy is not small against p^2/2."""


class CornerHit(BilliardError):
    """A ray passed within tolerance of a polygon vertex."""


class TangentHit(BilliardError):
    """A ray grazed a circular boundary."""

"""Exception hierarchy shared by every module of the package."""


class BundleMorphError(Exception):
    """Base class for all errors raised by :mod:`bundlemorph`."""


# geometry
class VelocityTooLarge(BundleMorphError):
    pass


class ChartEscape(BundleMorphError):
    pass


class OutsideDiagonalNeighborhood(BundleMorphError):
    pass


class ShootingDiverged(BundleMorphError):
    pass


# bundles and pullbacks
class EmptyOverlapSampling(BundleMorphError):
    pass


class NotInOverlap(BundleMorphError):
    pass


class NotInPatch(BundleMorphError):
    pass


class SingularTransition(BundleMorphError):
    """A matrix that must be inverted exceeds the condition-number guard."""


class BaseMismatch(BundleMorphError):
    pass


class BasePointMismatch(BundleMorphError):
    pass


# morphisms
class NoCoveringPatch(BundleMorphError):
    pass


class IncompatibleLocals(BundleMorphError):
    pass


class BaseMapMismatch(BundleMorphError):
    pass


# mapping space
class OutsideChartDomain(BundleMorphError):
    pass


class ParameterOutOfRange(BundleMorphError):
    pass


# transport
class PatchGap(BundleMorphError):
    pass


class SingularTransport(BundleMorphError):
    pass


# rigidity
class NoEscapeScale(BundleMorphError):
    pass


# expression language
class ExprError(BundleMorphError):
    """Base class for expression-language errors; ``offset`` is a byte offset or None."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


class ExprSyntaxError(ExprError):
    pass


class UnknownFunction(ExprError):
    pass


class UnboundVariable(ExprError):
    pass


class DomainError(ExprError):
    pass


# scenarios
class ScenarioParseError(BundleMorphError):
    pass


class UnresolvedReference(BundleMorphError):
    def __init__(self, name, location):
        self.name = name
        self.location = location
        super().__init__(f"unresolved reference {name!r} at {location}")

"""Exception hierarchy used across the package."""


class KnotoidError(Exception):
    """Base class for all structured errors raised by this package."""


class NotInvertible(KnotoidError):
    """Raised when a Laurent polynomial has no inverse in the ring."""


class ParseError(KnotoidError):
    """Malformed KDX / BDX / polynomial text."""


class ValidationError(KnotoidError):
    """A diagram or braidoid violates a structural invariant."""


class IllegalMove(KnotoidError):
    """A rewriting move was requested at a site where it is not legal."""


class StaleSite(IllegalMove):
    """A move site no longer matches the diagram it is applied to."""


class OpenWalk(KnotoidError):
    """A winding query was made for a walk that does not close up."""


class EndpointInMarkedFace(KnotoidError):
    """Closure is impossible because an endpoint sits inside p1 or p2."""


class NoRoute(KnotoidError):
    """No admissible dual-graph route exists for a closure arc."""


class MixedVariablePresent(KnotoidError):
    """Jones specialisation requested for a diagram with annular winding."""


class LayoutNotGeneric(KnotoidError):
    """A layout has coincident heights or other degenerate geometry."""


class TargetOnFixedStrand(KnotoidError):
    """An L-move was aimed at the fixed strand of a mixed braidoid."""

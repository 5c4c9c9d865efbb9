"""Exception hierarchy shared by every layer of the planner."""


class GladError(Exception):
    """Base class for all errors raised by gladsim."""


class ParseError(GladError):
    pass


class ValidationError(GladError):
    pass


class UnknownLane(GladError, KeyError):
    pass


class StationOutOfRange(GladError, ValueError):
    pass


class InapplicableBehavior(GladError):
    pass


class RealizationError(GladError):
    """A symbolic plan has no geometric realization."""


class InconsistentPlan(RealizationError):
    pass


class MergeBeyondLaneEnd(RealizationError):
    pass


class PoiBehindVehicle(RealizationError):
    pass


class EmptyRequest(GladError, ValueError):
    pass


class InfeasibleRequest(GladError):
    pass


class OutOfRange(GladError, ValueError):
    pass


class DegenerateBaseRate(GladError, ValueError):
    pass


class PoseMismatch(GladError):
    pass


class NonTermination(GladError, RuntimeError):
    pass


class EmptyResults(GladError, ValueError):
    pass

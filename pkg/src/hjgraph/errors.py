"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class HJGraphError(Exception):
    """Base class for every error raised by the library."""


# graph / simplex validation
class GraphError(HJGraphError, ValueError):
    pass


class NotConnected(GraphError):
    pass


class NonpositiveWeight(GraphError):
    pass


class SelfLoop(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class SimplexError(HJGraphError, ValueError):
    pass


class NegativeMass(SimplexError):
    pass


class MassNotOne(SimplexError):
    pass


class BoundaryPoint(HJGraphError, ValueError):
    """A log or a central difference was requested at a point with a zero coordinate."""


# metric tensors
class DomainError(HJGraphError, ValueError):
    pass


class NoExtension(HJGraphError):
    """The tensor has no continuous extension of (log s - log t) g(s, t) to the boundary."""


class DivergentIntegral(HJGraphError, ArithmeticError):
    pass


class OutOfRange(HJGraphError, ValueError):
    pass


# elliptic problems
class MassNotZero(HJGraphError, ValueError):
    pass


class DegenerateOperator(HJGraphError, ArithmeticError):
    pass


# transport
class EndpointMismatch(HJGraphError, ValueError):
    pass


class NotConverged(HJGraphError, ArithmeticError):
    pass


# flows
class StepTooLarge(HJGraphError, ArithmeticError):
    pass


class FreezeEventEncountered(HJGraphError, ArithmeticError):
    pass

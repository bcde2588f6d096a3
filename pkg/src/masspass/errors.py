"""Exception hierarchy shared by all masspass modules."""


class MasspassError(Exception):
    """Base class for all library errors."""


class ConfigError(MasspassError):
    """Invalid configuration or malformed input data."""


class DimensionMismatch(ConfigError):
    """Vector or matrix dimensions do not match the ambient pair."""


class AntipodalPoint(MasspassError):
    """Inverse exponential requested at (or too close to) the antipode."""


class HypothesisViolated(MasspassError):
    """A quantitative hypothesis of a second-order estimate fails on the input."""


class GeometryFailure(MasspassError):
    """Mountain-pass geometry is violated numerically (level not above endpoints)."""


class SelectionFailure(MasspassError):
    """No admissible path with bounded top could be selected from the pool."""


class UnsupportedDimension(MasspassError):
    """Parameter-domain dimension outside the supported range."""


class PreconditionOutOfBall(MasspassError):
    """A descent operation was invoked outside its guaranteed radius."""


class FrameTransportFailure(MasspassError):
    """Frame transport failed, typically because a node is near the antipode."""


class CoverFailure(MasspassError):
    """The covering construction cannot satisfy its requirements at this scale."""


class FrameDimensionTooSmall(MasspassError):
    """A negative frame of insufficient dimension was supplied to a deformation."""


class SlowDecrease(MasspassError):
    """First-order deformation exhausted its travel budget before the target level."""


class BudgetExceeded(MasspassError):
    """Iteration or refinement budget exhausted before certification."""


class NoConvergence(MasspassError):
    """Newton refinement did not converge to a critical point."""


class NotSymmetric(MasspassError):
    """Positivization requested for a problem without modulus invariance."""

"""Exception types raised across the package."""


class ProxTDError(Exception):
    """Base class for all package errors."""


class BehaviorZero(ProxTDError, ValueError):
    """Behavior policy assigns zero probability to an action that was taken."""


class InvalidDistribution(ProxTDError, ValueError):
    pass


class NotConverged(ProxTDError, RuntimeError):
    pass


class OutOfRange(ProxTDError, IndexError):
    pass


class DegenerateResidual(ProxTDError, ValueError):
    """Bellman residual vanished: the value is already representable."""


class SingularC(ProxTDError, ValueError):
    pass


class SingularA(ProxTDError, ValueError):
    pass


class ZeroMstar(ProxTDError, ValueError):
    pass


class LmiViolated(ProxTDError, ValueError):
    pass


class DimensionMismatch(ProxTDError, ValueError):
    pass


class GridInfeasible(ProxTDError, ValueError):
    pass


class ActionOutOfBounds(ProxTDError, ValueError):
    pass


class DivergenceDetected(ProxTDError, RuntimeError):
    pass

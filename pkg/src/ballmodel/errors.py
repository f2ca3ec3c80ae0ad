"""Exception types raised by the toolkit."""


class BallModelError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(BallModelError, ValueError):
    pass


class ShapeMismatch(DimensionMismatch):
    pass


class NonFiniteEntries(BallModelError, ValueError):
    pass


class NotHermitian(BallModelError, ValueError):
    pass


class IndefiniteBeyondTolerance(BallModelError, ValueError):
    pass


class PointOutsideBall(BallModelError, ValueError):
    pass


class SingularResolvent(BallModelError, ArithmeticError):
    pass


class OrderZero(BallModelError, ValueError):
    pass


class NotStabilized(BallModelError, RuntimeError):
    pass


class NotAContraction(BallModelError, ValueError):
    pass


class NotRowContraction(NotAContraction):
    pass


class NotCloselyConnected(BallModelError, ValueError):
    pass


class NotOnSphere(BallModelError, ValueError):
    pass


class InputError(BallModelError, ValueError):
    """Malformed user input (files, flags)."""

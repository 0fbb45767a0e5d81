"""Exception hierarchy shared by every subpackage."""


class GridAttackError(Exception):
    """Base class for all package errors."""


class ParseError(GridAttackError, ValueError):
    """A case, profile or config file could not be read."""


class ValidationError(GridAttackError, ValueError):
    """An input violates a documented invariant.

    The message names the rule and the offending element.
    """


class SingularNetwork(GridAttackError):
    """The in-service network is disconnected (islanded)."""


class NotConverged(GridAttackError):
    """An operation needs a converged power-flow solution."""


class EpisodeFinished(GridAttackError):
    """``step`` was called on an environment whose episode is over."""


class InvalidAction(GridAttackError, ValueError):
    pass


class DimensionMismatch(GridAttackError, ValueError):
    pass


class KindMismatch(GridAttackError, TypeError):
    pass


class NonFiniteLoss(GridAttackError, FloatingPointError):
    pass


class NonFiniteObjective(GridAttackError, FloatingPointError):
    def __init__(self, coordinate, message=None):
        self.coordinate = coordinate
        super().__init__(message or f"objective is not finite when probing coordinate {coordinate}")


class InfeasibleWindow(GridAttackError, ValueError):
    pass


class EmptyReport(GridAttackError, ValueError):
    pass

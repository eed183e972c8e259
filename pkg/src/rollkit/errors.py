"""Exception types shared by all rollkit modules."""


class RollkitError(Exception):
    """Base class for every error raised by the package."""


class OutOfChart(RollkitError):
    """A point left the chart domain of a model.

    ``t_reached`` carries the last time that was integrated successfully when
    the error comes out of a time integration.
    """

    def __init__(self, message, t_reached=None):
        super().__init__(message)
        self.t_reached = t_reached


class NonSPD(RollkitError):
    pass


class StepTooLarge(RollkitError):
    pass


class DimNot3(RollkitError):
    pass


class FrameNotOrthonormal(RollkitError):
    pass


class BadSpec(RollkitError):
    pass


class InvalidState(RollkitError):
    pass


class BaseMismatch(RollkitError):
    pass


class DimMismatch(RollkitError):
    pass


class NotFlatTarget(RollkitError):
    pass


class LoopNotClosed(RollkitError):
    pass


class DepthExceeded(RollkitError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class KZero(RollkitError):
    pass


class FrameUnavailable(RollkitError):
    pass


class NotMBeta(RollkitError):
    pass


class Unclassified(RollkitError):
    pass


class ContactLost(RollkitError):
    pass


class ModeMismatch(RollkitError):
    pass


class ConfigError(RollkitError):
    pass

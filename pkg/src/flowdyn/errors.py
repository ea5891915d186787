"""Exception types raised across the package."""


class FlowDynError(Exception):
    """Base class for all package errors."""


class BadMagic(FlowDynError, ValueError):
    pass


class TruncatedFile(FlowDynError, ValueError):
    pass


class DimensionOverflow(FlowDynError, ValueError):
    pass


class NonFiniteValue(FlowDynError, ValueError):
    pass


class IoFailure(FlowDynError, OSError):
    pass


class TooFewFrames(FlowDynError, ValueError):
    pass


class MixedDimensions(FlowDynError, ValueError):
    pass


class DecodeFailure(FlowDynError, ValueError):
    pass


class InvalidGamma(FlowDynError, ValueError):
    pass


class EmptyStream(FlowDynError, ValueError):
    pass


class SingleClass(FlowDynError, ValueError):
    pass


class DimensionMismatch(FlowDynError, ValueError):
    pass


class InsufficientData(FlowDynError, ValueError):
    pass


class MissingSelection(FlowDynError, KeyError):
    pass


class ActorExceedsFrame(FlowDynError, ValueError):
    pass

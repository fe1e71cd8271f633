"""Exception types shared across the pipeline."""


class ActionProtoError(Exception):
    """Base class for domain errors raised by this package."""


class ConfigError(ActionProtoError, ValueError):
    pass


class NonConvergedFlight(ActionProtoError, RuntimeError):
    """A jump did not come to rest within ``max_flight_time``."""


class UnknownPredicate(ActionProtoError, KeyError):
    pass


class DegenerateData(ActionProtoError, ValueError):
    pass


class SingleCluster(ActionProtoError, ValueError):
    pass


class DegenerateClass(ActionProtoError, ValueError):
    pass


class InsufficientPoints(ActionProtoError, ValueError):
    pass


class UnknownGenerator(ActionProtoError, KeyError):
    pass


class FingerprintMismatch(ActionProtoError):
    """Input file was produced under a different simulator/feature config."""

"""Exception hierarchy shared by the library and the CLI driver."""


class SdpNnError(Exception):
    """Base class for every error raised by sdpnn."""


class DimensionError(SdpNnError, ValueError):
    pass


class NonFiniteInputError(SdpNnError, ValueError):
    pass


class NumericalFailure(SdpNnError, RuntimeError):
    """Raised when an iteration produces non-finite values or a factorization fails.

    ``state`` holds the last finite state (solution, factor, ...) so callers can
    still inspect how far the run got.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class TrainingDivergence(SdpNnError, RuntimeError):
    def __init__(self, message, losses=None):
        super().__init__(message)
        self.losses = losses or []


class DatasetError(SdpNnError, ValueError):
    pass


class ConfigError(SdpNnError, ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class StaleArtifactError(SdpNnError):
    pass

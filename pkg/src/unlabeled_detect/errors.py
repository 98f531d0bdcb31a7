"""Exception hierarchy shared by every module."""


class UnlabeledDetectError(Exception):
    """Base class for all package errors."""


class DomainError(UnlabeledDetectError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigurationError(UnlabeledDetectError, ValueError):
    """A model or experiment configuration is inconsistent.

    ``field`` names the offending configuration entry when known.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class SolverError(UnlabeledDetectError, RuntimeError):
    """A numerical solver failed to converge.

    ``diagnostics`` carries whatever state the solver had when it gave up.
    """

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class RefusalError(UnlabeledDetectError, ValueError):
    """The request is valid but deliberately not served (e.g. too large for brute force)."""

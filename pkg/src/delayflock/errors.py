"""Shared exception and warning types."""


class ConfigError(ValueError):
    """Invalid configuration, construction parameter, or command usage."""


class LookbackError(RuntimeError):
    """A delayed-time query fell outside the stored history window."""


class BracketError(ValueError):
    """Bisection endpoints do not bracket a classification change."""


class DegenerateConnectivityWarning(UserWarning):
    """Second Laplacian eigenvalue is numerically indistinguishable from zero."""

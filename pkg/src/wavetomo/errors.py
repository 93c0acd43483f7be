"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: ConfigurationError -> 2,
NumericalError -> 3, anything else -> generic failure.
"""


class WavetomoError(Exception):
    """Base class for all package errors."""


class ConfigurationError(WavetomoError):
    """Invalid configuration value or inconsistent setup."""


class GeometryError(WavetomoError):
    """A projection footprint left the extent of a layer or grid."""


class ModelError(WavetomoError):
    """A statistical model is degenerate (non-SPD covariance, bad diagonal)."""


class NumericalError(WavetomoError):
    """Breakdown inside an iterative solver (non-finite values)."""

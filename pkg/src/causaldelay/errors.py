"""Exception hierarchy shared across the toolkit.

The CLI maps ``ConfigError`` to a usage exit status and everything else
deriving from ``CausalDelayError`` to an estimation exit status.
"""


class CausalDelayError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(CausalDelayError, ValueError):
    """Invalid or incomplete run configuration."""


class DataError(CausalDelayError, ValueError):
    """Malformed input data or a violated table precondition."""


class EstimationError(CausalDelayError, RuntimeError):
    """A statistical procedure could not produce a valid result."""


class DegenerateInferenceError(EstimationError):
    """Score variance is zero, so standard errors are undefined."""


class RankDeficiencyError(EstimationError):
    """A regression design lacks full column rank."""


class GraphError(CausalDelayError, ValueError):
    """Invalid graph operation, e.g. one that would create a cycle."""

"""
Exception hierarchy for the topology app.
Every error carries the exit code the management commands report.
"""


class TopologyError(Exception):
    """Base class for all topology errors."""

    exit_code = 2


class ConfigError(TopologyError, ValueError):
    """Run configuration failed schema validation."""

    exit_code = 2


class DomainError(TopologyError, ValueError):
    """Argument outside the domain of an operation."""

    exit_code = 2


class FermiLevelError(DomainError):
    """Fermi level on spectrum."""

    exit_code = 3


class GapClosedError(TopologyError):
    """The spectral gap at the Fermi level is closed."""

    exit_code = 3


class PreconditionError(TopologyError):
    """A hypothesis of the index theorem does not hold (e.g. odd time reversal)."""

    exit_code = 2


class QualityGateError(TopologyError):
    """Residual gate, ambiguous window or estimator disagreement."""

    exit_code = 4

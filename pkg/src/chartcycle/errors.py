"""Shared exception types."""


class ChartCycleError(Exception):
    """Base class for all package errors."""


class ConfigError(ChartCycleError):
    """Invalid run configuration or CLI arguments (exit code 2)."""


class ManifestError(ChartCycleError):
    """Problem loading or validating a manifest file."""


class ManifestParseError(ManifestError):
    """A manifest line is not valid JSON."""


class ManifestValidationError(ManifestError):
    """A manifest line violates a field or uniqueness constraint."""


class GenerationError(ChartCycleError):
    """The text backend produced an unusable (e.g. empty) response."""


class TransportError(ChartCycleError):
    """Transient backend transport failure; safe to retry."""


class InfrastructureError(ChartCycleError):
    """Non-recoverable environment failure that aborts a run (exit code 3)."""


class BackendUnavailableError(ChartCycleError):
    """A configured backend (model file, OCR engine) cannot be loaded."""


class DecodeError(ChartCycleError):
    """Image bytes could not be decoded."""


class ContractError(ChartCycleError):
    """Caller violated an operation precondition (e.g. mixed backends)."""


class UndefinedAggregateError(ChartCycleError):
    """An aggregate was requested over an empty or degenerate input."""


class DataError(ChartCycleError):
    """External data files are inconsistent (missing scores, ragged votes)."""


class UnknownChartTypeError(ChartCycleError):
    """Chart type is not one of the nine supported types."""


class ConflictError(ChartCycleError):
    """Review-state conflict: stale lease, wrong reviewer, or double verdict."""

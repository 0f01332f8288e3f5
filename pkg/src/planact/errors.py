"""Exception types shared across the package."""


class PlanactError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(PlanactError):
    """Operand shapes are incompatible with the requested operation."""


class NumericError(PlanactError):
    """A computation produced or received non-finite values."""


class ContractError(PlanactError):
    """A precondition of an operation was violated by the caller."""


class ParseError(PlanactError):
    """Structured text (plan documents) could not be parsed."""


class ConfigError(PlanactError):
    """A configuration file or value is invalid."""


class IngestError(PlanactError):
    """An input data file could not be read or decoded."""


class ValidationError(PlanactError):
    """Input data was readable but violates a consistency constraint."""


class PipelineError(PlanactError):
    """The dataset pipeline reached an unrecoverable state."""

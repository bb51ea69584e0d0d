"""Exception hierarchy shared across the package."""


class MetaDetectorError(Exception):
    """Base class for all package errors."""


class DimensionError(MetaDetectorError):
    """Tensor shapes incompatible with the requested operation."""


class ConfigurationError(MetaDetectorError):
    """Invalid hyperparameter or run configuration."""


class ContractError(MetaDetectorError):
    """Caller violated an API precondition."""


class EmptySequenceError(MetaDetectorError):
    """Operation requires at least one element."""


class ParseError(MetaDetectorError):
    """Malformed input file; message carries the offending line number."""


class VocabMismatchError(MetaDetectorError):
    """Token ids out of range for the vocabulary/table in use."""


class DegenerateDataError(MetaDetectorError):
    """Data collapses (e.g. all pairwise distances zero)."""


class SampleSizeError(MetaDetectorError):
    """Too few samples for the requested estimator."""


class NumericalError(MetaDetectorError):
    """Non-finite value encountered during optimization."""


class CheckpointError(MetaDetectorError):
    """Checkpoint file inconsistent with the requesting context."""

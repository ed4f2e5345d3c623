"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition (range, shape, schema)."""


class ConfigError(ValueError):
    """Run or model configuration is malformed (unknown key, bad value)."""


class DataError(RuntimeError):
    """Dataset, manifest or file-format problem."""


class CheckpointError(RuntimeError):
    """Checkpoint file is missing, corrupt or incompatible."""


class ProviderError(RuntimeError):
    """A pluggable provider (perceptual features, distance) is unavailable."""


class TrainingAborted(RuntimeError):
    """Training stopped on a non-recoverable condition (e.g. non-finite loss)."""

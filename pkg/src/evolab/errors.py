"""Exception taxonomy shared across the package."""


class ConfigError(ValueError):
    """Invalid model / optimizer / experiment configuration."""


class InputError(ValueError):
    """Invalid argument values or shapes passed to an operation."""


class FormatError(ValueError):
    """Malformed input file (wrong magic, truncation, count mismatch)."""


class ContractViolation(RuntimeError):
    """A caller broke a documented precondition (e.g. occluded label in a
    training batch, stale forward cache)."""


class NumericError(RuntimeError):
    """Numerical failure during a run (e.g. divergence to NaN)."""

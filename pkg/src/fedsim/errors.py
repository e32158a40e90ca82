"""Exception types shared across the package."""


class FedsimError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(FedsimError):
    """Invalid or mutually inconsistent experiment configuration."""


class DataError(FedsimError):
    """Malformed input data or an infeasible data operation."""


class ContractError(FedsimError):
    """A runtime contract was violated (shape mismatch, non-finite values, ...)."""

class InvalidInputError(ValueError):
    """Raised when an operation receives data of the wrong shape, length or content."""


class InvalidConfigError(ValueError):
    """Raised for invalid hyperparameters or configuration files."""


class SamplingError(RuntimeError):
    """Raised when randomized synthesis cannot satisfy its constraints."""

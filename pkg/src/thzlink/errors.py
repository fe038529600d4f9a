"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration input."""


class SingularChannelError(ValueError):
    """Channel matrix is rank deficient beyond the decomposition tolerance."""

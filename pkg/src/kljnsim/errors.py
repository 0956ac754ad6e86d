"""Exception types shared across the package."""


class KljnError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(KljnError):
    """A configuration value, scenario element or topology is invalid."""


class UsageError(KljnError):
    """An operation was invoked in a way its contract forbids."""

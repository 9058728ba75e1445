"""Exception types shared across the package."""


class ConfigurationError(Exception):
    """Raised when a configuration is internally inconsistent or violates
    an operating-regime constraint (as opposed to a plainly invalid
    argument, which raises ValueError)."""

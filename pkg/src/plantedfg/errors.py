"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """An input violates a documented precondition."""


class ResourceLimitError(RuntimeError):
    """An exact enumeration would exceed its hard size guard."""

"""Error types for the adapter."""


class AdapterError(ValueError):
    """A violated precondition or output contract."""


class ModelUnavailableError(AdapterError):
    """The requested backend cannot be loaded in this environment."""

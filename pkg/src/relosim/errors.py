"""Exception types shared across the package."""


class ValidationError(Exception):
    """Bad input data: malformed files, broken references, out-of-range values.

    Collects one message per offending file/feature so a validation pass can
    report everything at once.
    """

    def __init__(self, messages):
        if isinstance(messages, str):
            messages = [messages]
        self.messages = list(messages)
        super().__init__("; ".join(self.messages))


class EvictionError(ValidationError):
    """An intervention would remove occupied housing capacity."""


class UnreachableError(Exception):
    """No route exists between two points for the requested mode."""

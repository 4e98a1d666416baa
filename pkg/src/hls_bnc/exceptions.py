class ConfigError(ValueError):
    """Invalid configuration, schema or argument combination."""


class ParseError(ValueError):
    """Malformed input file."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class NumericalError(FloatingPointError):
    """Non-finite objective, failed factorization or similar numeric breakdown."""

class ARFMError(Exception):
    pass


class DimensionError(ARFMError, ValueError):
    pass


class DomainError(ARFMError, ValueError):
    pass


class ConfigurationError(ARFMError):
    pass


class NumericError(ARFMError, ArithmeticError):
    """
    Non-finite value inside a computation.

    `step` is the Euler / training step index and `layer` the network layer
    name when the failure can be located.
    """

    def __init__(self, message: str, step: int | None = None, layer: str | None = None):
        super().__init__(message)
        self.step = step
        self.layer = layer


class TrainingDivergence(NumericError):
    def __init__(self, message: str, report=None, step: int | None = None):
        super().__init__(message, step=step)
        self.report = report


class FormatError(ARFMError):
    pass


class SchemaVersionError(FormatError):
    pass


class ParseError(FormatError):
    def __init__(self, message: str, line_number: int | None = None):
        super().__init__(message)
        self.line_number = line_number

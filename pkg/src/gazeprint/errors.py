"""Exception hierarchy shared by the pipeline stages."""


class GazeprintError(Exception):
    """Base class for all user-facing errors raised by gazeprint."""


class ParseError(GazeprintError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(GazeprintError):
    pass


class ConfigurationError(GazeprintError):
    pass


class DomainError(GazeprintError):
    def __init__(self, message, index=None):
        self.index = index
        super().__init__(message)


class DegenerateInputError(GazeprintError):
    pass


class InsufficientDataError(GazeprintError):
    pass


class ShapeError(GazeprintError):
    pass

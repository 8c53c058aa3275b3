class HolorankError(Exception):
    """Base class for every error raised by the ranking library."""


class DimensionError(HolorankError, ValueError):
    pass


class ContractError(HolorankError, RuntimeError):
    pass


class NumericError(HolorankError, ArithmeticError):
    pass


class DivergenceError(NumericError):
    pass


class ConfigError(HolorankError, ValueError):
    pass


class VocabularyError(HolorankError, IndexError):
    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


class DataFormatError(HolorankError, ValueError):
    def __init__(self, message, path=None, line_number=None):
        location = ""
        if path is not None and line_number is not None:
            location = f"{path}:{line_number}: "
        elif path is not None:
            location = f"{path}: "
        super().__init__(f"{location}{message}")
        self.path = path
        self.line_number = line_number


class EmptyRunError(HolorankError, ValueError):
    pass


class UnknownDocumentError(HolorankError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class CheckpointError(HolorankError, ValueError):
    pass


# Errors an operator can fix by changing inputs; commands exit with 2 for these.
USAGE_ERRORS = (ConfigError, DataFormatError, CheckpointError, VocabularyError, FileNotFoundError)

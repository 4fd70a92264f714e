"""Exception types shared across the package."""


class ForecastError(Exception):
    """Base class for all package errors."""


class ConfigurationError(ForecastError, ValueError):
    """An option or size is outside its supported range."""


class DataError(ForecastError, ValueError):
    """Input data could not be parsed or violates a data precondition."""

    def __init__(self, message, row=None, path=None):
        self.row = row
        self.path = path
        prefix = ""
        if path is not None:
            prefix += f"{path}: "
        if row is not None:
            prefix += f"row {row}: "
        super().__init__(prefix + message)


class DegenerateScaleError(DataError):
    """A scaler was fitted on data with zero spread."""


class UndefinedRatioError(ForecastError, ValueError):
    """Every target is too close to zero to form a prediction/target ratio."""


class SchemaError(ForecastError, ValueError):
    """An artifact file does not match the expected schema or version."""

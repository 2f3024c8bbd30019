"""Exception types shared across the package."""


class SpikefuseError(Exception):
    """Base class for all spikefuse errors."""


class DataFormatError(SpikefuseError):
    """A data file violates its documented layout.

    Carries optional file/line context so command-line users can find the
    offending record.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix = f"{path}: "
        if line is not None:
            prefix += f"line {line}: "
        super().__init__(prefix + message)


class ConfigError(SpikefuseError):
    """A configuration value or manifest is invalid."""


class EvaluationEmptyError(SpikefuseError):
    """An evaluation was requested but no usable concept pairs remain."""

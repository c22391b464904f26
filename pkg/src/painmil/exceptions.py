"""Exception hierarchy shared by every stage of the pipeline."""


class PainMilError(Exception):
    """Base class for all errors raised by painmil."""


class InvalidInputError(PainMilError, ValueError):
    pass


class ConfigError(PainMilError, ValueError):
    pass


class ParseError(PainMilError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DuplicateKeyError(ParseError):
    pass


class IncompleteFrameError(InvalidInputError):
    pass


class EmptySegmentError(InvalidInputError):
    pass


class InvalidTrainingSetError(InvalidInputError):
    pass


class NumericalError(PainMilError, ArithmeticError):
    pass


class UndefinedMetricError(PainMilError, ValueError):
    pass


class MismatchError(PainMilError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class StageError(PainMilError):
    """Wraps an error with the pipeline stage and the entity that caused it."""

    def __init__(self, stage, entity, cause):
        self.stage = stage
        self.entity = entity
        self.cause = cause
        where = f" [{entity}]" if entity is not None else ""
        super().__init__(f"{stage}{where}: {cause}")

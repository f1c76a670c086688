"""Exception types shared across the package."""


class TrigfitError(Exception):
    """Base class for all package errors."""


class DomainError(TrigfitError, ValueError):
    """An input lies outside the domain of some factor (log x <= 0, tan near a pole)."""

    def __init__(self, message, factor=None, x=None):
        super().__init__(message)
        self.factor = factor
        self.x = x


class ExpressionOverflowError(TrigfitError, OverflowError):
    """Evaluation produced a non-finite intermediate value."""


class ParseError(TrigfitError, ValueError):
    """Malformed expression text. ``position`` is the 0-based offset of the problem."""

    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class EmptyDesignError(TrigfitError, ValueError):
    """Every row of a design matrix was dropped by domain filtering."""


class RankDeficiencyError(TrigfitError, ArithmeticError):
    """Least squares without ridge hit a rank-deficient design."""

    def __init__(self, message, dependent_columns=()):
        super().__init__(message)
        self.dependent_columns = list(dependent_columns)


class WavFormatError(TrigfitError, ValueError):
    """Unsupported or malformed WAV content."""


class WavTruncatedError(TrigfitError, OSError):
    """The WAV data chunk is shorter than its header claims."""


class DivergenceError(TrigfitError, ArithmeticError):
    """A wave parameter became non-finite during gradient descent."""

    def __init__(self, wave, pass_index, sample, params=None):
        super().__init__(
            f"non-finite parameter at wave {wave}, pass {pass_index}, sample {sample}"
        )
        self.wave = wave
        self.pass_index = pass_index
        self.sample = sample
        self.params = params

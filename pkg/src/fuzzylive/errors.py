"""Exception hierarchy. Everything raised on purpose derives from FuzzyLiveError."""


class FuzzyLiveError(Exception):
    pass


class InvalidGradeError(FuzzyLiveError, ValueError):
    pass


class InvalidMembershipFunctionError(FuzzyLiveError, ValueError):
    pass


class InvalidVariableError(FuzzyLiveError, ValueError):
    pass


class InvalidFrameCountError(FuzzyLiveError, ValueError):
    pass


class InvalidCounterError(FuzzyLiveError, ValueError):
    pass


class InvalidHomogeneityError(FuzzyLiveError, ValueError):
    pass


class OutOfDomainError(FuzzyLiveError, ValueError):
    pass


class UnknownVariableError(FuzzyLiveError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class InvalidStepError(FuzzyLiveError, ValueError):
    pass


class NoActivationError(FuzzyLiveError):
    """The aggregated output curve is zero everywhere."""


class RuleSyntaxError(FuzzyLiveError, ValueError):
    """A rule-file diagnostic anchored at a 1-based line and column."""

    def __init__(self, message, line, column):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column


class UnknownTermError(RuleSyntaxError):
    pass


class DuplicateAntecedentError(RuleSyntaxError):
    pass


class EmptyRuleBaseError(RuleSyntaxError):
    pass


class ImageTooSmallError(FuzzyLiveError, ValueError):
    pass


class ImageFormatError(FuzzyLiveError, ValueError):
    pass


class EmptyHistogramError(FuzzyLiveError, ValueError):
    pass


class InvalidWindowError(FuzzyLiveError, ValueError):
    pass


class InvalidTrackError(FuzzyLiveError, ValueError):
    pass


class LengthMismatchError(FuzzyLiveError, ValueError):
    pass


class ManifestError(FuzzyLiveError, ValueError):
    pass


class MissingFileError(ManifestError):
    pass


class FrameSizeError(ManifestError):
    pass


class ConfigError(FuzzyLiveError, ValueError):
    pass


class CannotTuneError(FuzzyLiveError, ValueError):
    pass


class StageError(FuzzyLiveError):
    """Wraps an upstream failure with the pipeline stage it happened in."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause

"""Exception hierarchy shared across the pipeline stages."""


class DigitizerError(Exception):
    """Base class for every error raised by graphdigitizer."""


class UndecodableImage(DigitizerError):
    pass


class OutOfBounds(DigitizerError):
    pass


class MalformedAnnotation(DigitizerError):
    pass


class UnknownCategory(MalformedAnnotation):
    pass


class BoxOutOfBounds(MalformedAnnotation):
    pass


class AxesNotFound(DigitizerError):
    pass


class DegenerateRegion(DigitizerError):
    pass


class EmptyInput(DigitizerError):
    pass


class ZeroVector(DigitizerError):
    pass


class CountMismatch(DigitizerError):
    pass


class AmbiguousAssignment(DigitizerError):
    pass


class NonNumeric(DigitizerError):
    pass


class TooFewLabels(DigitizerError):
    pass


class ValidationFailed(DigitizerError):
    pass


class Degenerate(DigitizerError):
    pass


class NoGroundTruth(DigitizerError):
    pass


class InvalidSpec(DigitizerError):
    pass


class ConfigError(DigitizerError):
    pass

"""Exception hierarchy shared by all monoloc modules."""


class MonolocError(Exception):
    """Base class for every error raised by this package."""


class NearPiRotation(MonolocError):
    """Rotation angle within 1e-6 of pi; the log map branch is ambiguous."""


class NonPositiveDepth(MonolocError):
    """Point does not lie strictly in front of the camera."""


class ParseError(MonolocError):
    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class NonUnitQuaternion(MonolocError):
    """Quaternion norm outside the [0.999, 1.001] renormalization band."""


class DuplicateObservation(MonolocError):
    pass


class IoError(MonolocError):
    pass


class DimensionMismatch(MonolocError):
    pass


class EmptyInput(MonolocError):
    pass


class MissingDescriptor(MonolocError):
    pass


class MissingPose(MonolocError):
    pass


class UnknownSeed(MonolocError):
    pass


class DegenerateGeometry(MonolocError):
    pass


class InsufficientObservations(MonolocError):
    pass


class NoConvergence(MonolocError):
    pass


class SingularInformation(MonolocError):
    pass


class NegativeVariance(MonolocError):
    pass


class InsufficientHistory(MonolocError):
    pass


class SingularCovariance(MonolocError):
    pass


class NoInput(MonolocError):
    pass


class GenerationFailure(MonolocError):
    pass


class LocalizationFailure(MonolocError):
    pass

"""Exception hierarchy shared by every module of the package."""


class QRNGError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(QRNGError, ValueError):
    """An argument lies outside its documented domain."""


class InfeasibleModelError(QRNGError):
    """The requested operating point cannot be realised by the detector model."""


class InfeasibleCalibrationError(InfeasibleModelError):
    """No equivalent efficiency in [0, 1] reproduces a measured bit probability."""


class TruncationPolicyError(InfeasibleModelError):
    """The tail-mass targets cannot be met within the configured hard cap."""


class CalibrationRangeError(ParameterError):
    """A requested mean photon number lies outside a tabulated calibration curve."""


class ResourceLimitError(QRNGError):
    """An exhaustive oracle was asked to enumerate more than its size guard allows."""


class FrameFormatError(QRNGError):
    """Base class for frame-file parse failures."""


class BadMagicError(FrameFormatError):
    pass


class TruncatedPayloadError(FrameFormatError):
    pass


class PixelCountMismatchError(FrameFormatError):
    pass

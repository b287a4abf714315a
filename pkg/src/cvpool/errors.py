"""Exception hierarchy. The CLI maps ConfigError to exit code 1 and DataError to 2."""


class CvpoolError(Exception):
    pass


class ConfigError(CvpoolError, ValueError):
    """Bad parameters, malformed config/grid/spec files, contradictory estimator setups."""


class DataError(CvpoolError):
    """Anything wrong with the input data itself."""


class ImageFormatError(DataError):
    pass


class ManifestError(DataError):
    pass


class AllPixelsInvalidError(DataError):
    """Raised when preprocessing leaves no usable pixel.

    The fully preprocessed image is kept on ``.image`` so callers can inspect it.
    """

    def __init__(self, message, image=None):
        super().__init__(message)
        self.image = image


class DegenerateFeatureMapError(DataError):
    """The feature map carries no signal (e.g. no edges), so the illuminant is undefined."""

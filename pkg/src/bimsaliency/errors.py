"""Exception types shared across the pipeline."""


class SceneError(Exception):
    """Base class for every error raised by this package."""


class MissingFile(SceneError):
    pass


class DimensionMismatch(SceneError):
    pass


class UnknownElementId(SceneError):
    pass


class MalformedCatalog(SceneError):
    pass


class InvalidDepth(SceneError):
    """Depth raster holds NaN, negative samples, or sky without the sentinel."""


class IoError(SceneError):
    pass


class InvalidScalePair(SceneError):
    pass


class ImageTooSmall(SceneError):
    pass


class NoVanishingPoint(SceneError):
    pass


class EmptyRelevantRegion(SceneError):
    """The profile selects no pixel in this view, so there is nothing to enhance."""

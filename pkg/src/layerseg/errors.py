"""Exception types shared across the package."""


class LayersegError(Exception):
    """Base class for all layerseg errors."""


class SearchRegionDisconnected(LayersegError):
    """The masked search region no longer connects the start and end nodes.

    Raised by the shortest-path search when a restricted region of interest
    leaves no route across the image.  ``stage`` identifies the segmentation
    stage that failed when the error is surfaced by the segmentation driver.
    """

    def __init__(self, message: str, stage: str | None = None):
        super().__init__(message)
        self.stage = stage

    def __str__(self) -> str:
        base = super().__str__()
        if self.stage:
            return f"[{self.stage}] {base}"
        return base


class InvalidBand(LayersegError):
    """A projection band has its top boundary below its bottom boundary."""


class MissingBoundary(LayersegError):
    """A requested boundary is absent from a segmentation result."""


class DimensionMismatch(LayersegError):
    """Two images that must share dimensions do not."""


class VolumeFormatError(LayersegError):
    """A raw volume file or its sidecar metadata is malformed."""

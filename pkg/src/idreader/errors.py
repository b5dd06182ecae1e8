"""Exception types shared across the package."""


class IdReaderError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateQuad(IdReaderError):
    """Quadrilateral is degenerate (collinear points, zero area, singular map)."""


class ImageTooSmall(IdReaderError):
    """Image too small for the locator's region scheme."""


class ShapeMismatch(IdReaderError):
    """Tensor or image shapes are inconsistent with the operation."""


class InvalidQuality(IdReaderError):
    """JPEG quality outside [1, 100]."""


class MalformedStream(IdReaderError):
    """Byte stream could not be decoded as an image."""


class FormatError(IdReaderError):
    """Weights file has a bad magic, version, or inconsistent header."""


class UnsupportedConfig(IdReaderError):
    """Network configuration produces non-integral feature-map shapes."""


class EmptyDataset(IdReaderError):
    """Dataset has no samples."""


class EmptyManifest(IdReaderError):
    """Manifest has no records."""


class EmptyList(IdReaderError):
    """A name/place/street list is empty."""


class InvalidName(IdReaderError):
    """Name unusable for fiscal-code derivation."""


class TextOverflow(IdReaderError):
    """Rendered text does not fit its layout rectangle."""


class PlacementInfeasible(IdReaderError):
    """Document placement constraints cannot be satisfied."""


class MissingLayout(IdReaderError):
    """No layout registered for a document class."""


class IoError(IdReaderError):
    """File could not be read or written."""

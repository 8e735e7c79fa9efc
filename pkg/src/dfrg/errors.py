"""Exception hierarchy shared by every module."""


class DfrgError(Exception):
    """Base class for all library errors."""


class UnsupportedFormat(DfrgError):
    pass


class CorruptFile(DfrgError):
    pass


class HeaderMismatch(DfrgError):
    pass


class IoFailure(DfrgError):
    pass


class InvalidLength(DfrgError, ValueError):
    pass


class EmptySignal(DfrgError, ValueError):
    pass


class InconsistentConfig(DfrgError, ValueError):
    pass


class ShapeMismatch(DfrgError, ValueError):
    pass


class MaskAboveOne(DfrgError, ValueError):
    """Raised when the mask complement ``1 - M`` would go negative."""


class InvalidLevel(DfrgError, ValueError):
    pass


class SilentSignal(DfrgError, ValueError):
    pass


class SegmentOutOfRange(DfrgError, ValueError):
    pass


class NoiseTooShort(DfrgError, ValueError):
    pass


class TooManyFilters(DfrgError, ValueError):
    pass


class DimMismatch(DfrgError, ValueError):
    pass


class EmptyCatalog(DfrgError, ValueError):
    pass


class RegimeConstraintViolated(DfrgError, ValueError):
    pass

"""Exception hierarchy shared by all modules."""


class StitchError(Exception):
    """Base class for every error raised by rotostitch."""


class SingularTransform(StitchError, ValueError):
    pass


class OutOfBounds(StitchError, ValueError):
    pass


class ImageTooSmall(StitchError, ValueError):
    pass


class ImageTooNarrow(ImageTooSmall):
    pass


class HeightMismatch(StitchError, ValueError):
    pass


class DegenerateConfiguration(StitchError, ValueError):
    pass


class NoConsensus(StitchError, RuntimeError):
    pass


class InsufficientCandidates(StitchError, ValueError):
    pass


class NoValidColumn(StitchError, ValueError):
    pass


class IdenticalRegions(StitchError, ValueError):
    """Overlap regions are equal everywhere, so PSNR is infinite."""


class InvalidGeometry(StitchError, ValueError):
    pass


class EmptySequence(StitchError, ValueError):
    pass


class PanoramaTooSmall(StitchError, ValueError):
    pass


class ConfigError(StitchError, ValueError):
    pass

"""Exception types raised across the pipeline."""


class FilamentError(Exception):
    """Base class for all errors raised by :mod:`filacwe`."""


class ImageReadError(FilamentError, OSError):
    """The file could not be opened or decoded."""


class UnsupportedFormatError(FilamentError, ValueError):
    """The file is readable but not a supported grayscale raster."""


class EmptyImageError(FilamentError, ValueError):
    """The image has zero width or height."""


class ImageWriteError(FilamentError, OSError):
    """The destination path could not be written."""


class InvalidImageError(FilamentError, ValueError):
    """An array violates the GrayImage/BinaryMask invariants."""


class DimensionMismatchError(FilamentError, ValueError):
    """Two grids that must share a shape do not."""


class NoDiskFoundError(FilamentError, ValueError):
    """No pixel exceeds the disk-detection threshold."""


class DegenerateImageError(FilamentError, ValueError):
    """The input has too little intensity variation for the operation."""


class EvolutionDivergedError(FilamentError, ArithmeticError):
    """Non-finite values appeared during level-set evolution.

    The level set of the last finite iteration is kept on ``phi`` and the
    iteration index on ``iteration`` for post-mortem inspection.
    """

    def __init__(self, message, iteration, phi, c1, c2):
        super().__init__(message)
        self.iteration = iteration
        self.phi = phi
        self.c1 = c1
        self.c2 = c2


class StageError(FilamentError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause

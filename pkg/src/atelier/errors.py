"""Exception types shared across the package.

Every failure mode raised by library code derives from AtelierError so
callers (and the CLI) can distinguish our errors from genuine bugs.
"""


class AtelierError(Exception):
    """Base class for all errors raised by this package."""


# --- imaging ---------------------------------------------------------------

class ZeroDimension(AtelierError):
    """A requested width or height was zero or negative."""


class AlphaModeViolation(AtelierError):
    """An operation received RGBA data in the wrong alpha mode."""


class OutOfBounds(AtelierError):
    """A rectangle extends past the image it addresses."""


class LayoutMismatch(AtelierError):
    """Two buffers (or a buffer and an operation) disagree on channel layout."""


class UnsupportedPng(AtelierError):
    """The PNG uses a feature outside this codec's scope (interlacing, palette...)."""


# --- pairsynth -------------------------------------------------------------

class PatchLargerThanImage(AtelierError):
    """Patch size exceeds the source image along at least one axis."""


class AllMasked(AtelierError):
    """The sampling mask removed every candidate patch position."""


class EmptyWeightMap(AtelierError):
    """A weight map carries no probability mass."""


class NotDivisibleByScale(AtelierError):
    """HR patch dimensions are not divisible by the degradation scale."""


class JitterOutOfBounds(AtelierError):
    """Photometric jitter exceeds the hard bound."""


# --- stencil ---------------------------------------------------------------

class SpecOutOfBounds(AtelierError):
    """An augmentation spec violates its documented parameter bounds."""


class EmptyAssetList(AtelierError):
    """composite_assets needs at least one asset."""


class MissingAlphaChannel(AtelierError):
    """A stencil asset PNG has no alpha channel."""


class UnreadableFile(AtelierError):
    """A file exists but could not be decoded."""


class UnknownZRole(AtelierError):
    """The folder taxonomy does not name a known Z-role."""


# --- tiler -----------------------------------------------------------------

class InvalidGeometry(AtelierError):
    """Tile/overlap/pad values are mutually inconsistent."""


class MissingTile(AtelierError):
    """stitch() expected a refined buffer for a tile and none was supplied."""


class DimensionMismatch(AtelierError):
    """A refined tile's dimensions do not match its padded rect times scale."""


class TargetUnreachable(AtelierError):
    """The schedule's step scales cannot reach the requested target scale."""


class BudgetTooSmall(AtelierError):
    """The memory budget is below the minimum feasible for this job."""

    def __init__(self, minimum_bytes: int, budget: int):
        self.minimum_bytes = int(minimum_bytes)
        self.budget = int(budget)
        super().__init__(
            f"memory budget {budget} B is below the minimum feasible "
            f"{self.minimum_bytes} B for this job geometry"
        )


# --- refiner_api -----------------------------------------------------------

class CapabilityExceeded(AtelierError):
    """A refine request violates the handle's advertised capabilities."""


class RefinerError(AtelierError):
    """A refiner failed while processing a tile."""

    def __init__(self, message: str, tile_index=None):
        self.tile_index = tile_index
        super().__init__(message if tile_index is None
                         else f"{message} (tile {tile_index})")


class TransportError(AtelierError):
    """The external refiner endpoint could not be reached."""


class ProtocolError(AtelierError):
    """The external refiner returned a malformed response."""


# --- dataset ---------------------------------------------------------------

class EmptyDataset(AtelierError):
    """An operation that needs records received none."""


class NoSingles(AtelierError):
    """Curriculum stage 1 would be empty."""


# --- cli -------------------------------------------------------------------

class ParseError(AtelierError):
    """A config file is not valid JSON."""


class ValidationError(AtelierError):
    """A config parsed but violates one or more constraints."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))

"""Exception types shared across the toolkit."""


class TwinError(Exception):
    """Base class for all toolkit errors."""


class DomainError(TwinError):
    """Input lies outside the supported domain of an operation."""


class DegenerateInputError(TwinError):
    """Input is too small or degenerate to operate on (collinear points, empty scene, ...)."""


class LasFormatError(TwinError):
    """Byte stream is not a LAS file."""


class LasUnsupportedError(TwinError):
    """LAS version or point record format not handled."""


class LasTruncationError(TwinError):
    """Point records end before the header-declared count."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class LasRangeError(TwinError):
    """Coordinate does not fit the 32-bit scaled integer representation."""


class TileCodecError(TwinError):
    """Tile payload failed to decode; carries the failing section and byte offset."""

    def __init__(self, section: str, offset: int, message: str):
        super().__init__(f"{section} section at byte {offset}: {message}")
        self.section = section
        self.offset = offset


class AsciiGridError(TwinError):
    """Malformed ESRI ASCII grid; message names the offending header key."""


class GridAlignmentError(TwinError):
    """Raster geometry does not match the expected grid."""


class ConfigError(TwinError):
    """Invalid pipeline configuration; carries the offending keys."""

    def __init__(self, message: str, keys: list[str] | None = None):
        super().__init__(message)
        self.keys = keys or []

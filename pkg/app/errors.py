"""
Error Types
Exception hierarchy voor tensor-, window- en config-fouten
"""


class VwaError(Exception):
    """Base class for every error raised by the package"""


class ShapeError(VwaError, ValueError):
    """Tensor shapes do not fit the operation"""


class GeometryError(VwaError, ValueError):
    """Window/stride/padding arithmetic does not work out for a dimension"""


class ConfigError(VwaError, ValueError):
    """Configuration invariant violated"""


class BoundsError(VwaError, IndexError):
    """Index or slice outside a dimension"""


class ContractError(VwaError):
    """Caller broke a documented pre-condition"""


class UnsupportedError(VwaError, NotImplementedError):
    """Requested behavior is deliberately not supported"""


class FormatError(VwaError, ValueError):
    """A file on disk is not in the expected format"""


class OverwriteError(VwaError, FileExistsError):
    """An artifact already exists and overwriting was not requested"""

"""Exception types shared across the pipeline."""


class StereopassError(Exception):
    """Base class for all errors raised by this package."""


class ImageIOError(StereopassError):
    """Reading or writing an image/map file failed."""


class ConfigError(StereopassError):
    """A configuration value or combination is invalid."""


class ShapeError(StereopassError):
    """Array shapes or channel counts do not match an operation's contract."""


class WeightLoadError(StereopassError):
    """A fusion weight file is malformed or inconsistent with the layer plan."""


class ProviderError(StereopassError):
    """A depth provider could not produce a usable disparity map."""


class MetricError(StereopassError):
    """A metric is undefined for the given inputs (e.g. empty support)."""

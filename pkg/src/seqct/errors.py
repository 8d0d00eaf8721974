"""Exception types shared across the package."""


class SeqctError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SeqctError):
    """Invalid parameter combination or run configuration."""


class GeometryError(SeqctError):
    """Acquisition geometry incompatible with the image grid."""


class FilterBreakdownError(SeqctError):
    """Numerical breakdown inside the sequential filter."""

    def __init__(self, slice_index, message):
        self.slice_index = slice_index
        super().__init__(f"slice {slice_index}: {message}")

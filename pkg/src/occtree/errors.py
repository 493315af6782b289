"""Exception types shared across the package."""


class OutOfExtentError(ValueError):
    """A coordinate lies outside the mapped extent.

    Carries the name of the offending axis in ``axis``.
    """

    def __init__(self, axis: str, value: float, half_extent: float):
        self.axis = axis
        self.value = value
        self.half_extent = half_extent
        super().__init__(
            f"coordinate {axis}={value!r} outside mapped extent "
            f"(|{axis}| must be < {half_extent!r})"
        )


class ScanFormatError(ValueError):
    """A scan file could not be parsed. ``line`` is the 1-based line number."""

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class MapFormatError(ValueError):
    """A map file could not be parsed. ``offset`` is the byte offset."""

    def __init__(self, offset: int, message: str):
        self.offset = offset
        super().__init__(f"byte {offset}: {message}")

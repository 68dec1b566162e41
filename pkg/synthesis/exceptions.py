"""Exceptions shared by the synthesis and odometry packages."""


class FlowOdometryError(Exception):
    """Base class for every error raised by this project."""


class ValidationError(FlowOdometryError, ValueError):
    """Raised when inputs or configuration fail validation."""


class InvalidArgumentError(ValidationError):
    pass


class InvalidConfigError(ValidationError):
    pass


class SingularMatrixError(ValidationError):
    pass


class DomainError(ValidationError):
    """Raised when a value lies outside the domain of an operation."""


class BehindCameraError(DomainError):
    """A transformed point landed closer than the near plane."""

    def __init__(self, pixel, depth, near_plane):
        self.pixel = tuple(int(i) for i in pixel)
        self.depth = float(depth)
        self.near_plane = float(near_plane)
        super().__init__(
            f"point at pixel (row={self.pixel[0]}, col={self.pixel[1]}) moved to "
            f"depth {self.depth:.6g}, below the near plane {self.near_plane:g}"
        )


class OutputExistsError(ValidationError):
    """Raised instead of overwriting an existing output without force."""


class GenerationFailedError(FlowOdometryError):
    pass


class FormatError(FlowOdometryError):
    """A file does not follow the expected on-disk format."""

    def __init__(self, message, offset=None, path=None):
        self.offset = offset
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if offset is not None:
            where.append(f"byte offset {offset}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(f"{prefix}{message}")

"""
Domain types for scene synthesis: camera intrinsics, rigid motions, pixel
grids, moving objects and generated samples.

Flow maps are ``H x W x 2`` float arrays of ``(du, dv)`` displacements and depth
maps are ``H x W`` float arrays of strictly positive depths in scene units.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray

from . import geometry
from .exceptions import DomainError, InvalidArgumentError, InvalidConfigError

FlowMap = NDArray[np.floating]
DepthMap = NDArray[np.floating]
Mask = NDArray[np.bool_]

NEAR_PLANE = 0.5


def _finite(*values):
    return all(math.isfinite(v) for v in values)


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole camera intrinsics without skew."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not _finite(self.fx, self.fy, self.cx, self.cy):
            raise InvalidArgumentError(f"intrinsics must be finite, got {self}")
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidArgumentError(
                f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}"
            )

    @property
    def matrix(self) -> NDArray[np.float64]:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    @property
    def inverse(self) -> NDArray[np.float64]:
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )

    @classmethod
    def from_matrix(cls, matrix) -> "Intrinsics":
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape != (3, 3):
            raise InvalidArgumentError(f"expected a 3x3 matrix, got {matrix.shape}")
        return cls(
            fx=float(matrix[0, 0]),
            fy=float(matrix[1, 1]),
            cx=float(matrix[0, 2]),
            cy=float(matrix[1, 2]),
        )


@dataclass(frozen=True)
class EulerAngles:
    """Rotation angles in radians, composed as ``Rz @ Ry @ Rx``."""

    rx: float
    ry: float
    rz: float

    def __post_init__(self):
        if not _finite(self.rx, self.ry, self.rz):
            raise InvalidArgumentError(f"Euler angles must be finite, got {self}")

    def __iter__(self):
        return iter((self.rx, self.ry, self.rz))

    def as_array(self) -> NDArray[np.float64]:
        return np.array([self.rx, self.ry, self.rz], dtype=np.float64)

    @classmethod
    def from_sequence(cls, values: Sequence[float]) -> "EulerAngles":
        values = [float(v) for v in values]
        if len(values) != 3:
            raise InvalidArgumentError(f"expected 3 angles, got {len(values)}")
        return cls(*values)


@dataclass(frozen=True)
class MotionSE3:
    """A rigid motion ``M = [r(rotation) translation; 0 1]``."""

    rotation: EulerAngles
    translation: Tuple[float, float, float]

    def __post_init__(self):
        translation = tuple(float(t) for t in self.translation)
        if len(translation) != 3 or not _finite(*translation):
            raise InvalidArgumentError(
                f"translation must be 3 finite values, got {self.translation}"
            )
        object.__setattr__(self, "translation", translation)
        if not isinstance(self.rotation, EulerAngles):
            object.__setattr__(
                self, "rotation", EulerAngles.from_sequence(self.rotation)
            )

    @classmethod
    def identity(cls) -> "MotionSE3":
        return cls(EulerAngles(0.0, 0.0, 0.0), (0.0, 0.0, 0.0))

    @classmethod
    def from_vector(cls, vector: Sequence[float]) -> "MotionSE3":
        """Build from ``(rx, ry, rz, tx, ty, tz)``."""
        vector = [float(v) for v in vector]
        if len(vector) != 6:
            raise InvalidArgumentError(f"expected 6 values, got {len(vector)}")
        return cls(EulerAngles(*vector[:3]), tuple(vector[3:]))

    @classmethod
    def from_matrix(cls, matrix) -> "MotionSE3":
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape != (4, 4):
            raise InvalidArgumentError(f"expected a 4x4 matrix, got {matrix.shape}")
        angles = geometry.rotation_to_euler(matrix[:3, :3])
        return cls(EulerAngles(*angles), tuple(matrix[:3, 3]))

    def to_vector(self) -> NDArray[np.float64]:
        return np.concatenate([self.rotation.as_array(), self.translation_array])

    @property
    def translation_array(self) -> NDArray[np.float64]:
        return np.array(self.translation, dtype=np.float64)

    @property
    def rotation_matrix(self) -> NDArray[np.float64]:
        return geometry.euler_to_rotation(self.rotation)

    @property
    def matrix(self) -> NDArray[np.float64]:
        result = np.eye(4)
        result[:3, :3] = self.rotation_matrix
        result[:3, 3] = self.translation_array
        return result

    @property
    def is_identity(self) -> bool:
        return not any(self.rotation) and not any(self.translation)

    def compose(self, first: "MotionSE3") -> "MotionSE3":
        """Return ``self ∘ first``: apply ``first``, then ``self``."""
        return MotionSE3.from_matrix(self.matrix @ first.matrix)

    def inverse(self) -> "MotionSE3":
        rotation = self.rotation_matrix
        result = np.eye(4)
        result[:3, :3] = rotation.T
        result[:3, 3] = -rotation.T @ self.translation_array
        return MotionSE3.from_matrix(result)


@dataclass(frozen=True)
class PixelGrid:
    """Dense row-major grid of pixel centers with ``(column, row)`` coordinates."""

    height: int
    width: int

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise InvalidArgumentError(
                f"grid must be at least 1x1, got {self.height}x{self.width}"
            )

    @classmethod
    def like(cls, array) -> "PixelGrid":
        return cls(int(array.shape[0]), int(array.shape[1]))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width

    @property
    def size(self) -> int:
        return self.height * self.width

    @property
    def coordinates(self) -> NDArray[np.float64]:
        rows, cols = np.meshgrid(
            np.arange(self.height, dtype=np.float64),
            np.arange(self.width, dtype=np.float64),
            indexing="ij",
        )
        return np.stack([cols, rows], axis=-1)


def validate_depth(depth, grid: Optional[PixelGrid] = None, name="depth"):
    depth = np.asarray(depth, dtype=np.float64)
    if depth.ndim == 3 and depth.shape[-1] == 1:
        depth = depth[..., 0]
    if depth.ndim != 2:
        raise InvalidArgumentError(f"{name} must be an H x W map, got {depth.shape}")
    if grid is not None and depth.shape != grid.shape:
        raise InvalidArgumentError(
            f"{name} shape {depth.shape} does not match grid {grid.shape}"
        )
    if not np.all(np.isfinite(depth)) or np.any(depth <= 0):
        raise DomainError(f"{name} must be finite and strictly positive")
    return depth


def validate_flow(flow, grid: Optional[PixelGrid] = None, name="flow"):
    flow = np.asarray(flow, dtype=np.float64)
    if flow.ndim != 3 or flow.shape[-1] != 2:
        raise InvalidArgumentError(f"{name} must be an H x W x 2 map, got {flow.shape}")
    if grid is not None and flow.shape[:2] != grid.shape:
        raise InvalidArgumentError(
            f"{name} shape {flow.shape[:2]} does not match grid {grid.shape}"
        )
    if not np.all(np.isfinite(flow)):
        raise InvalidArgumentError(f"{name} must be finite everywhere")
    return flow


@dataclass(eq=False)
class ObjectSpec:
    """An independently moving region placed in front of the background."""

    mask: Mask
    depth_offset: float
    motion: MotionSE3

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.ndim != 2 or not self.mask.any():
            raise InvalidArgumentError("object mask must be a non-empty H x W region")
        if not math.isfinite(self.depth_offset) or self.depth_offset <= 0:
            raise InvalidArgumentError(
                f"depth offset must be positive, got {self.depth_offset}"
            )

    @property
    def coverage(self) -> float:
        return float(self.mask.mean())


@dataclass(eq=False)
class ObjectFlow:
    spec: ObjectSpec
    flow: FlowMap


@dataclass(eq=False)
class SceneSample:
    """One generated training sample."""

    intrinsics: Intrinsics
    depth: DepthMap
    next_depth: DepthMap
    next_depth_valid: Mask
    total_flow: FlowMap
    ego_flow: FlowMap
    objects: List[ObjectFlow]
    camera_motion: MotionSE3
    seed: int
    seed_trail: List[int] = field(default_factory=list)

    @property
    def grid(self) -> PixelGrid:
        return PixelGrid.like(self.depth)

    @property
    def object_mask(self) -> Mask:
        union = np.zeros(self.depth.shape, dtype=bool)
        for item in self.objects:
            union |= item.spec.mask
        return union

    @property
    def object_coverage(self) -> float:
        return float(self.object_mask.mean())


def _check_range(name, bounds, positive=False):
    low, high = bounds
    if not _finite(low, high) or low > high:
        raise InvalidConfigError(f"{name} range must satisfy low <= high, got {bounds}")
    if positive and low <= 0:
        raise InvalidConfigError(f"{name} range must be positive, got {bounds}")


@dataclass(frozen=True)
class GenerationConfig:
    """Sampling distributions for the scene generator.

    Focal lengths and principal points are fractions of the image size.
    Motion limits are symmetric half-widths of uniform distributions.
    """

    focal_range: Tuple[float, float] = (0.5, 1.5)
    cx_range: Tuple[float, float] = (0.4, 0.6)
    cy_range: Tuple[float, float] = (0.4, 0.6)
    base_depth_range: Tuple[float, float] = (4.0, 12.0)
    noise_amplitude: float = 0.25
    noise_octaves: int = 4
    # lattice spacing of the coarsest noise octave, as a fraction of fx
    noise_cell: float = 0.5
    near_plane: float = NEAR_PLANE
    camera_rotation: float = 0.1
    camera_translation: float = 0.5
    object_rotation: float = 0.2
    object_translation: float = 1.0
    object_count_range: Tuple[int, int] = (0, 5)
    object_radius_range: Tuple[float, float] = (0.05, 0.25)
    object_offset_range: Tuple[float, float] = (0.1, 0.5)
    max_attempts: int = 32

    @property
    def max_objects(self) -> int:
        return int(self.object_count_range[1])

    def validate(self) -> "GenerationConfig":
        _check_range("focal", self.focal_range, positive=True)
        _check_range("cx", self.cx_range)
        _check_range("cy", self.cy_range)
        _check_range("base depth", self.base_depth_range, positive=True)
        _check_range("object radius", self.object_radius_range, positive=True)
        _check_range("object offset", self.object_offset_range, positive=True)
        _check_range("object count", self.object_count_range)
        if self.object_offset_range[1] >= 1.0:
            raise InvalidConfigError("object offset fractions must stay below 1")
        if self.object_count_range[0] < 0:
            raise InvalidConfigError("object count cannot be negative")
        for name in (
            "camera_rotation",
            "camera_translation",
            "object_rotation",
            "object_translation",
            "noise_amplitude",
        ):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise InvalidConfigError(f"{name} must be a non-negative number")
        if max(self.camera_rotation, self.object_rotation) > math.pi / 4:
            raise InvalidConfigError("rotation limits must not exceed pi/4")
        if self.noise_octaves < 1 or self.noise_cell <= 0:
            raise InvalidConfigError("noise needs at least one octave and a cell > 0")
        if self.near_plane <= 0 or self.near_plane >= self.base_depth_range[0]:
            raise InvalidConfigError(
                "near plane must be positive and below the base depth range"
            )
        if self.max_attempts < 1:
            raise InvalidConfigError("max_attempts must be at least 1")
        return self

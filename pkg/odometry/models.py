"""
Domain types for pose estimation: pixel-wise hypotheses, the patch partition
used by the selection module, fused global poses, loss and solver results and
evaluation reports.
"""

import enum
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from numpy.typing import NDArray

from synthesis.exceptions import InvalidArgumentError, InvalidConfigError
from synthesis.models import EulerAngles, MotionSE3

LOG_VARIANCE_LIMIT = 20.0


def _vector3(values, name):
    values = np.asarray(values, dtype=np.float64).reshape(-1)
    if values.shape != (3,) or not np.all(np.isfinite(values)):
        raise InvalidArgumentError(f"{name} must be 3 finite values, got {values!r}")
    return values


@dataclass(eq=False)
class PixelwisePose:
    """One 6-DoF camera-motion hypothesis per pixel with log-variances.

    All four maps are ``H x W x 3``. Rotations are Euler angles in radians,
    translations are in scene units and log-variances lie in ``[-20, 20]``.
    """

    rotation: NDArray[np.float64]
    translation: NDArray[np.float64]
    rotation_log_var: NDArray[np.float64]
    translation_log_var: NDArray[np.float64]

    def __post_init__(self):
        shape = np.shape(self.rotation)
        if len(shape) != 3 or shape[-1] != 3:
            raise InvalidArgumentError(f"pose maps must be H x W x 3, got {shape}")
        for name in ("rotation", "translation", "rotation_log_var", "translation_log_var"):
            value = np.asarray(getattr(self, name), dtype=np.float64)
            if value.shape != shape:
                raise InvalidArgumentError(f"{name} map has shape {value.shape}, expected {shape}")
            if not np.all(np.isfinite(value)):
                raise InvalidArgumentError(f"{name} map must be finite")
            setattr(self, name, value)
        for name in ("rotation_log_var", "translation_log_var"):
            value = getattr(self, name)
            if np.any(np.abs(value) > LOG_VARIANCE_LIMIT):
                raise InvalidArgumentError(f"{name} must lie in [-20, 20]")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.rotation.shape[:2]

    def as_arrays(self):
        return {
            "rotation": self.rotation,
            "translation": self.translation,
            "rotation_log_var": self.rotation_log_var,
            "translation_log_var": self.translation_log_var,
        }


@dataclass(eq=False)
class MotionFieldDesign:
    """Per-pixel ``2 x 6`` matrices mapping ``(translation, rotation)`` to flow."""

    matrices: NDArray[np.float64]

    @property
    def translational(self) -> NDArray[np.float64]:
        return self.matrices[..., :3]

    @property
    def rotational(self) -> NDArray[np.float64]:
        return self.matrices[..., 3:]

    def apply(self, translation, rotation) -> NDArray[np.float64]:
        """Linearized flow of a small motion at every pixel."""
        theta = np.concatenate([_vector3(translation, "translation"), _vector3(rotation, "rotation")])
        return self.matrices @ theta


@dataclass(frozen=True)
class EstimatorConfig:
    """Window fit settings for the pixel-wise estimator."""

    window: int = 5
    # Tikhonov damping of the linearized normal equations
    damping: float = 1e-8
    max_condition: float = 1e12
    epsilon: float = 1e-12
    # damped Gauss-Newton steps on the exact motion model after the linear solve
    iterations: int = 20
    initial_damping: float = 1e-6
    # add the whole-image discrepancy of each window pose to its residual
    context_residual: bool = True
    context_samples: int = 256
    chunk_size: int = 2048

    def validate(self) -> "EstimatorConfig":
        if self.window < 5 or self.window % 2 == 0:
            raise InvalidConfigError(f"window must be an odd integer >= 5, got {self.window}")
        if not self.damping > 0 or not self.initial_damping > 0:
            raise InvalidConfigError("damping values must be positive")
        if not self.epsilon > 0 or not self.max_condition > 1:
            raise InvalidConfigError("epsilon must be positive and max_condition above 1")
        if self.iterations < 0:
            raise InvalidConfigError("iterations cannot be negative")
        if self.context_samples < 1 or self.chunk_size < 1:
            raise InvalidConfigError("context_samples and chunk_size must be positive")
        return self


@dataclass(frozen=True)
class PatchGrid:
    """Row-major partition of a center-cropped map into ``k x k`` patches."""

    patch_size: int
    rows: int
    cols: int
    row_offset: int = 0
    col_offset: int = 0

    @property
    def height(self) -> int:
        return self.rows * self.patch_size

    @property
    def width(self) -> int:
        return self.cols * self.patch_size

    @property
    def count(self) -> int:
        return self.rows * self.cols

    def crop(self, array):
        array = np.asarray(array)
        return array[
            self.row_offset : self.row_offset + self.height,
            self.col_offset : self.col_offset + self.width,
        ]

    def patches(self, array):
        """Reshape an ``H x W x C`` map into ``rows x cols x k*k x C``."""
        cropped = self.crop(array)
        k = self.patch_size
        channels = cropped.shape[2:]
        blocks = cropped.reshape((self.rows, k, self.cols, k) + channels)
        blocks = np.swapaxes(blocks, 1, 2)
        return blocks.reshape((self.rows, self.cols, k * k) + channels)

    def pixel(self, patch_row, patch_col, index) -> Tuple[int, int]:
        """Absolute ``(row, col)`` of the ``index``-th pixel of a patch."""
        k = self.patch_size
        row = self.row_offset + patch_row * k + index // k
        col = self.col_offset + patch_col * k + index % k
        return int(row), int(col)


class WeightSign(enum.Enum):
    """Sign of the uncertainty inside the patch softmax."""

    NEGATED = "negated"
    AS_PRINTED = "as-printed"


@dataclass(frozen=True)
class GlobalPose:
    rotation: Tuple[float, float, float]
    translation: Tuple[float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "rotation", tuple(_vector3(self.rotation, "rotation").tolist()))
        object.__setattr__(
            self, "translation", tuple(_vector3(self.translation, "translation").tolist())
        )

    @classmethod
    def from_motion(cls, motion: MotionSE3) -> "GlobalPose":
        return cls(tuple(motion.rotation), motion.translation)

    @classmethod
    def from_vector(cls, vector) -> "GlobalPose":
        """Build from ``(rx, ry, rz, tx, ty, tz)``."""
        vector = np.asarray(vector, dtype=np.float64).reshape(-1)
        if vector.shape != (6,):
            raise InvalidArgumentError(f"expected 6 values, got {vector.shape}")
        return cls(vector[:3], vector[3:])

    def to_vector(self) -> NDArray[np.float64]:
        return np.array(self.rotation + self.translation, dtype=np.float64)

    def to_motion(self) -> MotionSE3:
        return MotionSE3(EulerAngles(*self.rotation), self.translation)


@dataclass(frozen=True)
class LossBreakdown:
    l_rotation: float
    l_translation: float
    l_depth: float
    l_flow: float

    @property
    def total(self) -> float:
        return self.l_rotation + self.l_translation + self.l_depth + self.l_flow


@dataclass(frozen=True)
class RefineConfig:
    max_iters: int = 50
    damping: float = 1e-4
    damping_factor: float = 10.0
    max_damping: float = 1e16
    step_tolerance: float = 1e-10
    cost_tolerance: float = 1e-12
    jacobian_step: float = 1e-7

    def validate(self) -> "RefineConfig":
        if self.max_iters < 1:
            raise InvalidConfigError("max_iters must be at least 1")
        if not self.damping > 0 or not self.damping_factor > 1:
            raise InvalidConfigError("damping must be positive and its factor above 1")
        if not self.jacobian_step > 0:
            raise InvalidConfigError("jacobian_step must be positive")
        for name in ("step_tolerance", "cost_tolerance"):
            if not math.isfinite(getattr(self, name)) or getattr(self, name) < 0:
                raise InvalidConfigError(f"{name} must be a non-negative number")
        return self


@dataclass
class RefineResult:
    pose: GlobalPose
    cost: float
    iterations: int
    converged: bool
    # cost after every accepted step, starting with the initial cost
    history: List[float] = field(default_factory=list)

    def __iter__(self):
        return iter((self.pose, self.cost, self.iterations))


@dataclass
class ScenePrediction:
    """What the estimate command stores for one scene."""

    name: str
    pose: GlobalPose
    ego_flow: Optional[NDArray[np.float64]] = None
    pixelwise: Optional[PixelwisePose] = None
    seed: Optional[int] = None
    refinement: Optional[dict] = None


@dataclass(frozen=True)
class SceneEvaluation:
    name: str
    r_err: float
    t_err: float
    epe: Optional[float] = None


@dataclass
class EvalReport:
    """Aggregate pose and flow errors with a per-scene breakdown."""

    r_err: float
    t_err: float
    epe: Optional[float]
    scenes: List[SceneEvaluation]
    l1_reduce: str = "mean"
    epe_norm: str = "l1"

    units = {"r_err": "rad", "t_err": "scene units", "epe": "px"}

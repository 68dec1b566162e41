"""
Camera geometry: Euler rotations, backprojection through the intrinsics,
rigid point transforms and projection.

Rotations are intrinsic X-then-Y-then-Z, i.e. ``R = Rz @ Ry @ Rx``. Pixel
coordinates are ``(column, row)`` with the origin at the top-left pixel center.
"""


import numpy as np
from scipy.spatial.transform import Rotation

from .exceptions import DomainError, InvalidArgumentError, SingularMatrixError

MAX_CONDITION = 1e12


def _angles_array(angles):
    values = np.asarray(tuple(angles) if not hasattr(angles, "shape") else angles)
    values = values.astype(np.float64, copy=False)
    if values.shape[-1:] != (3,):
        raise InvalidArgumentError(f"expected Euler angles of shape (..., 3), got {values.shape}")
    if not np.all(np.isfinite(values)):
        raise InvalidArgumentError("Euler angles must be finite")
    return values


def rotation_matrices(angles):
    """Batched ``Rz @ Ry @ Rx`` for angles of shape ``(..., 3)``."""
    angles = _angles_array(angles)
    cx, cy, cz = np.cos(angles[..., 0]), np.cos(angles[..., 1]), np.cos(angles[..., 2])
    sx, sy, sz = np.sin(angles[..., 0]), np.sin(angles[..., 1]), np.sin(angles[..., 2])
    result = np.empty(angles.shape[:-1] + (3, 3))
    result[..., 0, 0] = cz * cy
    result[..., 0, 1] = cz * sy * sx - sz * cx
    result[..., 0, 2] = cz * sy * cx + sz * sx
    result[..., 1, 0] = sz * cy
    result[..., 1, 1] = sz * sy * sx + cz * cx
    result[..., 1, 2] = sz * sy * cx - cz * sx
    result[..., 2, 0] = -sy
    result[..., 2, 1] = cy * sx
    result[..., 2, 2] = cy * cx
    return result


def euler_to_rotation(angles):
    """Rotation matrix ``r(γ)`` of a single set of Euler angles."""
    angles = _angles_array(angles)
    if angles.shape != (3,):
        raise InvalidArgumentError(f"expected 3 angles, got shape {angles.shape}")
    return rotation_matrices(angles)


def _axis_rotations(angles):
    zeros = np.zeros(angles.shape[:-1])
    ones = np.ones(angles.shape[:-1])
    rotations = []
    derivatives = []
    for axis in range(3):
        c, s = np.cos(angles[..., axis]), np.sin(angles[..., axis])
        if axis == 0:
            rot = [[ones, zeros, zeros], [zeros, c, -s], [zeros, s, c]]
            der = [[zeros, zeros, zeros], [zeros, -s, -c], [zeros, c, -s]]
        elif axis == 1:
            rot = [[c, zeros, s], [zeros, ones, zeros], [-s, zeros, c]]
            der = [[-s, zeros, c], [zeros, zeros, zeros], [-c, zeros, -s]]
        else:
            rot = [[c, -s, zeros], [s, c, zeros], [zeros, zeros, ones]]
            der = [[-s, -c, zeros], [c, -s, zeros], [zeros, zeros, zeros]]
        rotations.append(np.moveaxis(np.array(rot), (0, 1), (-2, -1)))
        derivatives.append(np.moveaxis(np.array(der), (0, 1), (-2, -1)))
    return rotations, derivatives


def rotation_derivatives(angles):
    """Partial derivatives of ``Rz @ Ry @ Rx`` w.r.t. ``(rx, ry, rz)``.

    Returns an array of shape ``(..., 3, 3, 3)`` whose ``[..., k, :, :]`` entry is
    the derivative with respect to angle ``k``.
    """
    angles = _angles_array(angles)
    (rx, ry, rz), (dx, dy, dz) = _axis_rotations(angles)
    return np.stack([rz @ ry @ dx, rz @ dy @ rx, dz @ ry @ rx], axis=-3)


def rotation_to_euler(rotation):
    """Inverse of :func:`euler_to_rotation` with ``ry`` in ``[-pi/2, pi/2]``."""
    rotation = np.asarray(rotation, dtype=np.float64)
    if rotation.shape != (3, 3) or not np.all(np.isfinite(rotation)):
        raise InvalidArgumentError("expected a finite 3x3 rotation matrix")
    # intrinsic z-y-x angles compose as Rz @ Ry @ Rx; scipy warns on gimbal lock and zeroes rx
    rz, ry, rx = Rotation.from_matrix(rotation).as_euler("ZYX")
    return float(rx), float(ry), float(rz)


def _inverse_intrinsics(intrinsics):
    if hasattr(intrinsics, "inverse"):
        return intrinsics.inverse
    matrix = np.asarray(intrinsics, dtype=np.float64)
    if matrix.shape != (3, 3) or not np.all(np.isfinite(matrix)):
        raise InvalidArgumentError("intrinsics must be a finite 3x3 matrix")
    if np.linalg.cond(matrix) > MAX_CONDITION:
        raise SingularMatrixError("intrinsic matrix is singular")
    return np.linalg.inv(matrix)


def backproject_pixels(intrinsics, pixels):
    """Film-space rays ``K^-1 (u, v, 1)`` for pixel coordinates of shape ``(..., 2)``."""
    pixels = np.asarray(pixels, dtype=np.float64)
    if hasattr(intrinsics, "fx"):
        rays = np.empty(pixels.shape[:-1] + (3,))
        rays[..., 0] = (pixels[..., 0] - intrinsics.cx) / intrinsics.fx
        rays[..., 1] = (pixels[..., 1] - intrinsics.cy) / intrinsics.fy
        rays[..., 2] = 1.0
        return rays
    inverse = _inverse_intrinsics(intrinsics)
    homogeneous = np.concatenate([pixels, np.ones(pixels.shape[:-1] + (1,))], axis=-1)
    rays = homogeneous @ inverse.T
    return rays / rays[..., 2:3]


def backproject(grid, intrinsics):
    """Film-space coordinates of every pixel of ``grid``."""
    return backproject_pixels(intrinsics, grid.coordinates)


def transform_points(motion, points, scale):
    """Apply ``motion`` to ``scale * points``; returns camera-frame points."""
    points = np.asarray(points, dtype=np.float64)
    scale = np.asarray(scale, dtype=np.float64)
    if scale.shape != points.shape[:-1]:
        raise InvalidArgumentError(
            f"scale shape {scale.shape} does not match points {points.shape[:-1]}"
        )
    if not np.all(np.isfinite(scale)) or np.any(scale <= 0):
        raise DomainError("depth must be finite and strictly positive")
    scaled = points * scale[..., None]
    if motion.is_identity:
        return scaled
    return scaled @ motion.rotation_matrix.T + motion.translation_array


def project(intrinsics, points):
    """Pixel coordinates ``(K X) / X_z`` of camera-frame points ``(..., 3)``."""
    points = np.asarray(points, dtype=np.float64)
    if hasattr(intrinsics, "fx"):
        z = points[..., 2]
        return np.stack(
            [
                intrinsics.fx * points[..., 0] / z + intrinsics.cx,
                intrinsics.fy * points[..., 1] / z + intrinsics.cy,
            ],
            axis=-1,
        )
    image = points @ np.asarray(intrinsics, dtype=np.float64).T
    return image[..., :2] / image[..., 2:3]

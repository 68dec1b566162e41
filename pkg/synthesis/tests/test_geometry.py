import math

import numpy as np
import pytest

from synthesis import geometry
from synthesis.exceptions import DomainError, InvalidArgumentError, SingularMatrixError
from synthesis.models import EulerAngles, Intrinsics, MotionSE3, PixelGrid


def test_zero_angles_give_exact_identity():
    np.testing.assert_array_equal(geometry.euler_to_rotation((0.0, 0.0, 0.0)), np.eye(3))


def test_rotation_is_proper_orthonormal(rng):
    for angles in rng.uniform(-math.pi, math.pi, size=(20, 3)):
        rotation = geometry.euler_to_rotation(angles)
        np.testing.assert_allclose(rotation @ rotation.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(rotation) == pytest.approx(1.0, abs=1e-12)


def test_rotation_composes_z_after_y_after_x():
    rx, ry, rz = 0.3, -0.2, 0.5
    expected = (
        geometry.euler_to_rotation((0, 0, rz))
        @ geometry.euler_to_rotation((0, ry, 0))
        @ geometry.euler_to_rotation((rx, 0, 0))
    )
    np.testing.assert_allclose(geometry.euler_to_rotation((rx, ry, rz)), expected, atol=1e-15)


def test_rotation_to_euler_round_trip(rng):
    for _ in range(50):
        angles = rng.uniform([-3, -1.5, -3], [3, 1.5, 3])
        recovered = geometry.rotation_to_euler(geometry.euler_to_rotation(angles))
        np.testing.assert_allclose(recovered, angles, atol=1e-9)


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_rotation_to_euler_gimbal_lock_reproduces_matrix():
    rotation = geometry.euler_to_rotation((0.4, math.pi / 2, 0.1))
    recovered = geometry.euler_to_rotation(geometry.rotation_to_euler(rotation))
    np.testing.assert_allclose(recovered, rotation, atol=1e-9)


def test_batched_rotations_match_single(rng):
    angles = rng.uniform(-1, 1, size=(4, 5, 3))
    batch = geometry.rotation_matrices(angles)
    assert batch.shape == (4, 5, 3, 3)
    np.testing.assert_allclose(batch[2, 3], geometry.euler_to_rotation(angles[2, 3]))


def test_rotation_derivatives_match_finite_differences(rng):
    step = 1e-6
    for angles in rng.uniform(-1, 1, size=(10, 3)):
        derivatives = geometry.rotation_derivatives(angles)
        for axis in range(3):
            offset = np.zeros(3)
            offset[axis] = step
            numeric = (
                geometry.euler_to_rotation(angles + offset)
                - geometry.euler_to_rotation(angles - offset)
            ) / (2 * step)
            np.testing.assert_allclose(derivatives[axis], numeric, atol=1e-8)


def test_non_finite_angles_rejected():
    with pytest.raises(InvalidArgumentError):
        geometry.euler_to_rotation((0.0, math.nan, 0.0))


def test_principal_point_backprojects_to_optical_axis():
    intrinsics = Intrinsics(50.0, 40.0, 3.0, 2.0)
    ray = geometry.backproject_pixels(intrinsics, np.array([3.0, 2.0]))
    np.testing.assert_array_equal(ray, [0.0, 0.0, 1.0])


def test_backprojection_through_matrix_matches_intrinsics(intrinsics, rng):
    pixels = rng.uniform(0, 64, size=(30, 2))
    np.testing.assert_allclose(
        geometry.backproject_pixels(intrinsics.matrix, pixels),
        geometry.backproject_pixels(intrinsics, pixels),
        atol=1e-12,
    )


def test_singular_matrix_rejected():
    with pytest.raises(SingularMatrixError):
        geometry.backproject_pixels(np.zeros((3, 3)), np.zeros((1, 2)))


def test_project_inverts_backproject(intrinsics, rng):
    grid = PixelGrid(6, 7)
    depth = rng.uniform(1, 5, size=grid.shape)
    points = geometry.backproject(grid, intrinsics) * depth[..., None]
    np.testing.assert_allclose(geometry.project(intrinsics, points), grid.coordinates, atol=1e-12)
    np.testing.assert_allclose(
        geometry.project(intrinsics.matrix, points), grid.coordinates, atol=1e-12
    )


def test_transform_points_identity_only_scales(intrinsics):
    grid = PixelGrid(3, 4)
    rays = geometry.backproject(grid, intrinsics)
    depth = np.full(grid.shape, 2.0)
    moved = geometry.transform_points(MotionSE3.identity(), rays, depth)
    np.testing.assert_array_equal(moved, rays * 2.0)


def test_transform_points_rejects_non_positive_depth(intrinsics):
    grid = PixelGrid(2, 2)
    rays = geometry.backproject(grid, intrinsics)
    with pytest.raises(DomainError):
        geometry.transform_points(MotionSE3.identity(), rays, np.zeros(grid.shape))


def test_motion_compose_matches_matrix_product(small_motion):
    other = MotionSE3(EulerAngles(-0.1, 0.05, 0.2), (0.3, 0.0, -0.1))
    composed = other.compose(small_motion)
    np.testing.assert_allclose(composed.matrix, other.matrix @ small_motion.matrix, atol=1e-12)


def test_motion_inverse_cancels(small_motion):
    identity = small_motion.inverse().compose(small_motion)
    np.testing.assert_allclose(identity.matrix, np.eye(4), atol=1e-12)


def test_motion_vector_round_trip(small_motion):
    assert MotionSE3.from_vector(small_motion.to_vector()) == small_motion


def test_intrinsics_validation():
    with pytest.raises(InvalidArgumentError):
        Intrinsics(0.0, 10.0, 1.0, 1.0)
    with pytest.raises(InvalidArgumentError):
        Intrinsics(10.0, 10.0, math.inf, 1.0)


def test_intrinsics_inverse(intrinsics):
    np.testing.assert_allclose(intrinsics.inverse @ intrinsics.matrix, np.eye(3), atol=1e-15)
    assert Intrinsics.from_matrix(intrinsics.matrix) == intrinsics


def test_quarter_turn_about_z_maps_x_to_y():
    rotation = geometry.euler_to_rotation((0.0, 0.0, math.pi / 2))
    np.testing.assert_allclose(rotation @ np.array([1.0, 0.0, 0.0]), [0.0, 1.0, 0.0], atol=1e-12)


def test_transform_points_matches_homogeneous_matrix(intrinsics, rng):
    motion = MotionSE3(EulerAngles(0.2, -0.15, 0.3), (0.5, -0.2, 0.8))
    grid = PixelGrid(5, 7)
    rays = geometry.backproject(grid, intrinsics)
    depth = rng.uniform(2.0, 9.0, size=grid.shape)
    homogeneous = np.concatenate([rays * depth[..., None], np.ones(grid.shape + (1,))], axis=-1)
    expected = (homogeneous @ motion.matrix.T)[..., :3]
    np.testing.assert_allclose(geometry.transform_points(motion, rays, depth), expected, atol=1e-12)


def test_motion_from_matrix_recovers_angles(small_motion):
    recovered = MotionSE3.from_matrix(small_motion.matrix)
    np.testing.assert_allclose(recovered.to_vector(), small_motion.to_vector(), atol=1e-12)
